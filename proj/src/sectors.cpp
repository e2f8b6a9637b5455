#include "marketstruct/sectors.hpp"

#include "marketstruct/parallel.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace marketstruct {

std::vector<VariancePath> variance_paths(const std::map<std::string, ReturnsPanel>& sector_panels,
                                         std::size_t window) {
    std::vector<std::pair<std::string, const ReturnsPanel*>> items;
    for (const auto& [name, panel] : sector_panels) {
        if (panel.cols() < 2)
            throw Error("sector '" + name + "' has " + std::to_string(panel.cols()) +
                        " asset(s); the dominant-eigenvalue share needs at least 2");
        if (panel.rows() < window + 1)
            throw Error("sector '" + name + "' is shorter than window + 1 rows");
        items.emplace_back(name, &panel);
    }
    std::vector<VariancePath> out(items.size());
    detail::parallel_for(items.size(), [&](std::size_t k) {
        const auto series = time_varying_rmt(*items[k].second, window);
        out[k] = {items[k].first, series.times, series.lambda1_weight_path};
    });
    return out;
}

double l1_path_distance(const VariancePath& a, const VariancePath& b) {
    if (a.values.size() != b.values.size() || a.times != b.times)
        throw Error("paths '" + a.sector + "' and '" + b.sector + "' are not aligned");
    if (a.values.empty()) throw Error("empty variance path");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) sum += std::abs(a.values[i] - b.values[i]);
    return sum / static_cast<double>(a.values.size());
}

DistanceMatrix path_distance_matrix(std::span<const VariancePath> paths) {
    DistanceMatrix d;
    const auto n = static_cast<Eigen::Index>(paths.size());
    d.values = Matrix::Zero(n, n);
    for (const auto& p : paths) d.labels.push_back(p.sector);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            d.values(i, j) = d.values(j, i) = l1_path_distance(paths[static_cast<std::size_t>(i)],
                                                               paths[static_cast<std::size_t>(j)]);
    return d;
}

std::string to_string(Linkage l) {
    switch (l) {
    case Linkage::average: return "average";
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    }
    return "average";
}

Linkage linkage_from_string(const std::string& s) {
    if (s == "average") return Linkage::average;
    if (s == "single") return Linkage::single;
    if (s == "complete") return Linkage::complete;
    throw Error("unknown linkage '" + s + "' (expected average, single or complete)");
}

std::vector<std::size_t> Dendrogram::leaf_order() const {
    const std::size_t n = labels.size();
    std::vector<std::size_t> order;
    if (n == 0) return order;
    if (merges.empty()) {
        for (std::size_t i = 0; i < n; ++i) order.push_back(i);
        return order;
    }
    std::function<void(std::size_t)> walk = [&](std::size_t id) {
        if (id < n) {
            order.push_back(id);
            return;
        }
        walk(merges[id - n].a);
        walk(merges[id - n].b);
    };
    walk(n + merges.size() - 1);
    return order;
}

Dendrogram agglomerative_cluster(const DistanceMatrix& d, Linkage linkage) {
    const std::size_t n = d.labels.size();
    if (n < 2) throw Error("clustering needs at least 2 labels");
    if (static_cast<std::size_t>(d.values.rows()) != n || static_cast<std::size_t>(d.values.cols()) != n)
        throw Error("distance matrix shape does not match its labels");
    if (d.values.hasNaN()) throw Error("distance matrix contains NaN");

    struct Cluster {
        std::size_t id;
        std::size_t size;
        std::string key;  // smallest leaf label
    };
    std::vector<Cluster> active;
    for (std::size_t i = 0; i < n; ++i) active.push_back({i, 1, d.labels[i]});
    Matrix dist = d.values;  // indexed by position in `active`

    Dendrogram out;
    out.labels = d.labels;
    while (active.size() > 1) {
        const auto m = active.size();
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        auto key_pair = [&](std::size_t i, std::size_t j) {
            const auto& a = active[i].key;
            const auto& b = active[j].key;
            return a < b ? std::pair{a, b} : std::pair{b, a};
        };
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                const double v = dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (v < best || (v == best && key_pair(i, j) < key_pair(bi, bj))) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (active[bj].key < active[bi].key) std::swap(bi, bj);
        const auto& ci = active[bi];
        const auto& cj = active[bj];
        out.merges.push_back({ci.id, cj.id, best, ci.size + cj.size});

        // Lance-Williams update written into row/column bi; bj is then dropped.
        const double ni = static_cast<double>(ci.size);
        const double nj = static_cast<double>(cj.size);
        for (std::size_t k = 0; k < m; ++k) {
            if (k == bi || k == bj) continue;
            const auto K = static_cast<Eigen::Index>(k);
            const double dki = dist(K, static_cast<Eigen::Index>(bi));
            const double dkj = dist(K, static_cast<Eigen::Index>(bj));
            double v = 0.0;
            switch (linkage) {
            case Linkage::single: v = std::min(dki, dkj); break;
            case Linkage::complete: v = std::max(dki, dkj); break;
            case Linkage::average: v = (ni * dki + nj * dkj) / (ni + nj); break;
            }
            dist(K, static_cast<Eigen::Index>(bi)) = dist(static_cast<Eigen::Index>(bi), K) = v;
        }
        active[bi] = {n + out.merges.size() - 1, ci.size + cj.size, std::min(ci.key, cj.key)};
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
        const auto J = static_cast<Eigen::Index>(bj);
        const auto rest = static_cast<Eigen::Index>(m) - J - 1;
        Matrix shrunk(m - 1, m - 1);
        shrunk.topLeftCorner(J, J) = dist.topLeftCorner(J, J);
        shrunk.topRightCorner(J, rest) = dist.topRightCorner(J, rest);
        shrunk.bottomLeftCorner(rest, J) = dist.bottomLeftCorner(rest, J);
        shrunk.bottomRightCorner(rest, rest) = dist.bottomRightCorner(rest, rest);
        dist = std::move(shrunk);
    }
    return out;
}

} // namespace marketstruct
