#include "marketstruct/portfolio.hpp"

#include "marketstruct/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace marketstruct {

namespace {

struct Score {
    double z = 0.0;
    double variance = 0.0;
    bool rankable = false;
    double rar() const { return z / variance; }
};

bool degenerate(double variance, double mean) {
    return !(variance > 1e-14 * std::max(mean * mean, 1e-300));
}

template <class Column>
Score score_window(const Column& col, std::size_t begin, std::size_t end) {
    const auto n = static_cast<double>(end - begin);
    double z = 0.0;
    for (std::size_t d = begin; d < end; ++d) z += col(static_cast<Eigen::Index>(d));
    const double mean = z / n;
    double ss = 0.0;
    for (std::size_t d = begin; d < end; ++d) {
        const double r = col(static_cast<Eigen::Index>(d)) - mean;
        ss += r * r;
    }
    Score s{z, ss / n, false};
    s.rankable = !degenerate(s.variance, mean);
    return s;
}

struct Ranked {
    std::size_t index;
    double rar;
};

/// Indices of the top-B entries by descending RAR, ties by ascending name.
std::vector<std::size_t> top_b(const std::vector<Score>& scores, const std::vector<std::string>& names, std::size_t b) {
    std::vector<Ranked> ranked;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i].rankable) ranked.push_back({i, scores[i].rar()});
    std::sort(ranked.begin(), ranked.end(), [&](const Ranked& x, const Ranked& y) {
        if (x.rar != y.rar) return x.rar > y.rar;
        return names[x.index] < names[y.index];
    });
    if (ranked.size() > b) ranked.resize(b);
    std::vector<std::size_t> out;
    for (const auto& r : ranked) out.push_back(r.index);
    return out;
}

struct Universe {
    std::vector<std::string> sector_names;
    std::vector<std::vector<std::size_t>> columns;  // per sector, panel columns sorted by ticker
};

Universe resolve(const ReturnsPanel& returns, const SectorMap& sectors) {
    if (sectors.empty()) throw Error("portfolio simulation needs at least one sector");
    Universe u;
    for (const auto& [name, tickers] : sectors) {
        if (tickers.empty()) throw Error("sector '" + name + "' has no securities");
        std::vector<std::string> sorted = tickers;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        std::vector<std::size_t> cols;
        for (const auto& t : sorted) cols.push_back(returns.column_of(t));
        u.sector_names.push_back(name);
        u.columns.push_back(std::move(cols));
    }
    return u;
}

void check_config(const ReturnsPanel& returns, const SimConfig& cfg) {
    if (cfg.window < 2) throw Error("portfolio window S must be at least 2");
    if (cfg.best < 1) throw Error("portfolio B must be at least 1");
    const std::size_t needed = cfg.window + 1 + (cfg.out_of_sample ? 1 : 0);
    if (returns.rows() < needed)
        throw Error("panel has " + std::to_string(returns.rows()) + " return rows; window S = " +
                    std::to_string(cfg.window) + " needs at least " + std::to_string(needed));
}

class WarningLog {
public:
    void note(const std::string& who) { ++counts_[who]; }
    std::vector<std::string> lines(const std::string& what) const {
        std::vector<std::string> out;
        for (const auto& [who, n] : counts_)
            out.push_back(who + ": " + what + " in " + std::to_string(n) + " window(s), excluded from ranking");
        return out;
    }

private:
    std::map<std::string, std::size_t> counts_;
};

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

SectorMap sector_map_from_panel(const ReturnsPanel& returns) {
    SectorMap out;
    for (const auto& a : returns.assets)
        for (const auto& s : a.sectors) out[s].push_back(a.ticker);
    return out;
}

SimResult algo1_security_selection(const ReturnsPanel& returns, const SectorMap& sectors, const SimConfig& cfg) {
    check_config(returns, cfg);
    const Universe u = resolve(returns, sectors);
    const auto tickers = returns.tickers();
    const std::size_t S = cfg.window;
    const std::size_t last = returns.rows() - (cfg.out_of_sample ? 2 : 1);
    SimResult res;
    WarningLog log;
    for (std::size_t t = S; t <= last; ++t) {
        std::vector<double> sector_values;
        std::vector<std::string> chosen;
        for (std::size_t l = 0; l < u.columns.size(); ++l) {
            const auto& cols = u.columns[l];
            std::vector<Score> scores;
            std::vector<std::string> names;
            for (std::size_t c : cols) {
                scores.push_back(score_window(returns.returns.col(static_cast<Eigen::Index>(c)), t - S, t + 1));
                names.push_back(tickers[c]);
                if (!scores.back().rankable) log.note(tickers[c]);
            }
            auto picks = top_b(scores, names, cfg.best);
            if (picks.empty()) {
                picks.resize(cols.size());
                std::iota(picks.begin(), picks.end(), 0);
            }
            std::vector<double> values;
            for (std::size_t i : picks) {
                const auto c = static_cast<Eigen::Index>(cols[i]);
                values.push_back(cfg.out_of_sample ? returns.returns(static_cast<Eigen::Index>(t + 1), c) : scores[i].z);
                chosen.push_back(names[i]);
            }
            sector_values.push_back(mean_of(values));
        }
        res.times.push_back(t);
        res.per_t.push_back(mean_of(sector_values));
        res.selections.push_back(std::move(chosen));
    }
    res.total = std::accumulate(res.per_t.begin(), res.per_t.end(), 0.0);
    res.warnings = log.lines("zero return variance");
    return res;
}

SimResult algo2_sector_allocation(const ReturnsPanel& returns, const SectorMap& sectors, const SimConfig& cfg) {
    check_config(returns, cfg);
    const Universe u = resolve(returns, sectors);
    const std::size_t S = cfg.window;
    const std::size_t last = returns.rows() - (cfg.out_of_sample ? 2 : 1);
    const auto rows = static_cast<Eigen::Index>(returns.rows());

    // Equal-weight basket per sector: Z and w'Sigma w of the basket equal the window
    // sum and population variance of the averaged daily series.
    std::vector<Vector> baskets;
    for (const auto& cols : u.columns) {
        Vector b = Vector::Zero(rows);
        for (std::size_t c : cols) b += returns.returns.col(static_cast<Eigen::Index>(c));
        baskets.push_back(b / static_cast<double>(cols.size()));
    }

    SimResult res;
    WarningLog log;
    for (std::size_t t = S; t <= last; ++t) {
        std::vector<Score> scores;
        for (std::size_t l = 0; l < baskets.size(); ++l) {
            scores.push_back(score_window(baskets[l], t - S, t + 1));
            if (!scores.back().rankable) log.note(u.sector_names[l]);
        }
        auto picks = top_b(scores, u.sector_names, cfg.best);
        if (picks.empty()) {
            picks.resize(scores.size());
            std::iota(picks.begin(), picks.end(), 0);
        }
        std::vector<double> values;
        std::vector<std::string> chosen;
        for (std::size_t l : picks) {
            values.push_back(cfg.out_of_sample ? baskets[l](static_cast<Eigen::Index>(t + 1)) : scores[l].z);
            chosen.push_back(u.sector_names[l]);
        }
        res.times.push_back(t);
        res.per_t.push_back(mean_of(values));
        res.selections.push_back(std::move(chosen));
    }
    res.total = std::accumulate(res.per_t.begin(), res.per_t.end(), 0.0);
    res.warnings = log.lines("zero basket variance");
    return res;
}

std::vector<SweepRow> sweep(const ReturnsPanel& returns, const SectorMap& sectors, std::vector<std::size_t> windows,
                            std::vector<std::size_t> bests, bool out_of_sample) {
    if (windows.empty() || bests.empty()) throw Error("sweep grids must be non-empty");
    std::sort(windows.begin(), windows.end());
    windows.erase(std::unique(windows.begin(), windows.end()), windows.end());
    std::sort(bests.begin(), bests.end());
    bests.erase(std::unique(bests.begin(), bests.end()), bests.end());
    std::vector<SweepRow> rows;
    for (std::size_t s : windows)
        for (std::size_t b : bests) rows.push_back({s, b, 0.0, 0.0});
    detail::parallel_for(rows.size(), [&](std::size_t i) {
        const SimConfig cfg{rows[i].window, rows[i].best, out_of_sample};
        rows[i].algo1_total = algo1_security_selection(returns, sectors, cfg).total;
        rows[i].algo2_total = algo2_sector_allocation(returns, sectors, cfg).total;
    });
    return rows;
}

} // namespace marketstruct
