#pragma once

#include "marketstruct/ingest.hpp"

#include <iterator>

namespace marketstruct {

/// Correlation matrix of the window ending at row t.
struct CorrelationMatrix {
    std::size_t t = 0;
    std::vector<std::string> tickers;
    Matrix values;
};

/// (1/S) Z^T Z over a standardised S x N slice.
Matrix gram_correlation(const Matrix& standardized);

CorrelationMatrix rolling_correlation(const ReturnsPanel& returns, std::size_t window, std::size_t t);

/// Lazy view over the windows t = S-1 .. T-1; each matrix is computed on access.
class RollingCorrelationSeries {
public:
    RollingCorrelationSeries(const ReturnsPanel& returns, std::size_t window);

    std::size_t size() const noexcept { return count_; }
    std::size_t window() const noexcept { return window_; }
    std::size_t first_t() const noexcept { return window_ - 1; }
    CorrelationMatrix operator[](std::size_t i) const;

    class iterator {
    public:
        using iterator_category = std::input_iterator_tag;
        using value_type = CorrelationMatrix;
        using difference_type = std::ptrdiff_t;

        iterator(const RollingCorrelationSeries* owner, std::size_t i) : owner_(owner), i_(i) {}
        CorrelationMatrix operator*() const { return (*owner_)[i_]; }
        iterator& operator++() {
            ++i_;
            return *this;
        }
        bool operator==(const iterator& other) const { return i_ == other.i_; }

    private:
        const RollingCorrelationSeries* owner_;
        std::size_t i_;
    };

    iterator begin() const { return {this, 0}; }
    iterator end() const { return {this, count_}; }

private:
    const ReturnsPanel* returns_;
    std::size_t window_;
    std::size_t count_;
};

/// Materialises every window; computed in parallel, returned in t order.
std::vector<CorrelationMatrix> rolling_correlation_series(const ReturnsPanel& returns, std::size_t window);

} // namespace marketstruct
