#include "marketstruct/rollcorr.hpp"

#include "marketstruct/parallel.hpp"

namespace marketstruct {

Matrix gram_correlation(const Matrix& standardized) {
    const double S = static_cast<double>(standardized.rows());
    Matrix c = Matrix::Zero(standardized.cols(), standardized.cols());
    c.selfadjointView<Eigen::Lower>().rankUpdate(standardized.transpose(), 1.0 / S);
    c = c.selfadjointView<Eigen::Lower>();
    return c;
}

CorrelationMatrix rolling_correlation(const ReturnsPanel& returns, std::size_t window, std::size_t t) {
    return {t, returns.tickers(), gram_correlation(standardize_window(returns, window, t))};
}

RollingCorrelationSeries::RollingCorrelationSeries(const ReturnsPanel& returns, std::size_t window)
    : returns_(&returns), window_(window), count_(0) {
    if (window < 2) throw Error("window must be at least 2");
    if (returns.rows() >= window) count_ = returns.rows() - window + 1;
}

CorrelationMatrix RollingCorrelationSeries::operator[](std::size_t i) const {
    if (i >= count_) throw Error("rolling correlation index out of range");
    return rolling_correlation(*returns_, window_, first_t() + i);
}

std::vector<CorrelationMatrix> rolling_correlation_series(const ReturnsPanel& returns, std::size_t window) {
    RollingCorrelationSeries view(returns, window);
    std::vector<CorrelationMatrix> out(view.size());
    detail::parallel_for(view.size(), [&](std::size_t i) { out[i] = view[i]; });
    return out;
}

} // namespace marketstruct
