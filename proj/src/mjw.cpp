#include "marketstruct/mjw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace marketstruct {

namespace {

using Masses = std::vector<std::pair<double, double>>;  // (position, mass), sorted by position

Masses scaled(const Distribution& d, double scale) {
    Masses out;
    out.reserve(d.size());
    for (const auto& [t, p] : d) out.emplace_back(static_cast<double>(t) * scale, p);
    return out;
}

double w1(const Masses& f, const Masses& g) {
    std::size_t i = 0, j = 0;
    double F = 0.0, G = 0.0, total = 0.0;
    double last = std::min(f.front().first, g.front().first);
    while (i < f.size() || j < g.size()) {
        const double next = std::min(i < f.size() ? f[i].first : std::numeric_limits<double>::infinity(),
                                     j < g.size() ? g[j].first : std::numeric_limits<double>::infinity());
        total += std::abs(F - G) * (next - last);
        while (i < f.size() && f[i].first == next) F += f[i++].second;
        while (j < g.size() && g[j].first == next) G += g[j++].second;
        last = next;
    }
    return total;
}

double nearest(const Masses& g, const std::vector<Masses>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : set) best = std::min(best, w1(g, f));
    return best;
}

double mjw(const std::vector<Masses>& s, const std::vector<Masses>& t, double order) {
    double a = 0.0, b = 0.0;
    for (const auto& g : t) a += std::pow(nearest(g, s), order);
    for (const auto& f : s) b += std::pow(nearest(f, t), order);
    return std::pow(a / (2.0 * static_cast<double>(t.size())) + b / (2.0 * static_cast<double>(s.size())),
                    1.0 / order);
}

std::vector<Masses> prepared(const DistributionSet& s, double scale) {
    std::vector<Masses> out;
    for (const auto& d : s.members) {
        validate_distribution(d);
        out.push_back(scaled(d, scale));
    }
    return out;
}

void check_order(double order) {
    if (!(order >= 1.0) || !std::isfinite(order)) throw Error("MJ-Wasserstein order must be >= 1");
}

} // namespace

void validate_distribution(const Distribution& d) {
    if (d.empty()) throw Error("distribution has empty support");
    double sum = 0.0;
    for (const auto& [t, p] : d) {
        if (!(p >= 0.0)) throw Error("distribution has a negative or NaN mass at t=" + std::to_string(t));
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw Error("distribution is not normalised (total mass " + std::to_string(sum) + ")");
}

double wasserstein_1d(const Distribution& f, const Distribution& g) {
    validate_distribution(f);
    validate_distribution(g);
    return w1(scaled(f, 1.0), scaled(g, 1.0));
}

double mjw_distance(const DistributionSet& s, const DistributionSet& t, double order) {
    check_order(order);
    if (s.members.empty() || t.members.empty()) throw Error("MJ-Wasserstein distance needs non-empty sets");
    return mjw(prepared(s, 1.0), prepared(t, 1.0), order);
}

MjwMatrix mjw_matrix(std::span<const DistributionSet> sets, const MjwOptions& options) {
    check_order(options.order);
    const auto n = sets.size();
    std::vector<std::vector<Masses>> prep;
    MjwMatrix out;
    out.distances.values = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& s : sets) {
        if (options.normalize_time && s.series_length == 0)
            throw Error("set '" + s.label + "' has no series length to normalise by");
        prep.push_back(prepared(s, options.normalize_time ? 1.0 / static_cast<double>(s.series_length) : 1.0));
        out.distances.labels.push_back(s.label);
        out.empty.push_back(s.members.empty());
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = 0.0;
            if (prep[i].empty() != prep[j].empty()) {
                if (options.empty_penalty) {
                    v = *options.empty_penalty;
                } else {
                    v = options.normalize_time ? 1.0
                                               : static_cast<double>(std::max(sets[i].series_length, sets[j].series_length));
                    if (v == 0.0) throw Error("no series length to use as the empty-set penalty");
                }
            } else if (!prep[i].empty()) {
                v = mjw(prep[i], prep[j], options.order);
            }
            out.distances.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            out.distances.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    return out;
}

} // namespace marketstruct
