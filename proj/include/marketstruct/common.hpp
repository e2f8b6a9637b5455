#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace marketstruct {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A column of a return window has zero sample variance and cannot be standardised.
class ZeroVarianceError : public Error {
public:
    ZeroVarianceError(std::string ticker, std::size_t t)
        : Error("zero-variance column '" + ticker + "' in window ending at t=" + std::to_string(t)),
          ticker_(std::move(ticker)), t_(t) {}

    const std::string& ticker() const noexcept { return ticker_; }
    std::size_t t() const noexcept { return t_; }

private:
    std::string ticker_;
    std::size_t t_;
};

/// Labelled symmetric distance matrix with zero diagonal.
struct DistanceMatrix {
    std::vector<std::string> labels;
    Matrix values;

    std::size_t size() const noexcept { return labels.size(); }
};

} // namespace marketstruct
