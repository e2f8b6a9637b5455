/**
 * @file portfolio.hpp
 * @brief Trailing risk-adjusted-return selection of securities and sectors.
 *
 * At each t in S..T-1 (row indices of the returns panel) the score of a security is
 *
 *     Z = sum_{d=t-S}^{t} R(d),   sigma^2 = population variance of the same S+1 returns,
 *     RAR = Z / sigma^2.
 *
 * Security selection keeps the top B securities of every sector by RAR and averages
 * their Z; sector allocation scores each sector's equal-weight basket the same way and
 * keeps the top B sectors. The portfolio value Z(t) is the mean over the kept groups and
 * the total is the sum of Z(t) over t. Windows overlap, so a day's return enters the
 * total up to S+1 times, and selection uses the window it is scored on. The
 * out-of-sample variant selects on [t-S, t] and realises R(t+1) instead.
 */
#pragma once

#include "marketstruct/ingest.hpp"

#include <map>

namespace marketstruct {

struct SimConfig {
    std::size_t window = 150;  // S
    std::size_t best = 2;      // B
    bool out_of_sample = false;
};

/// Sector name to member tickers.
using SectorMap = std::map<std::string, std::vector<std::string>>;

SectorMap sector_map_from_panel(const ReturnsPanel& returns);

struct SimResult {
    std::vector<std::size_t> times;
    std::vector<double> per_t;
    double total = 0.0;
    std::vector<std::vector<std::string>> selections;  // chosen tickers or sectors at each t
    std::vector<std::string> warnings;
};

SimResult algo1_security_selection(const ReturnsPanel& returns, const SectorMap& sectors, const SimConfig& cfg);
SimResult algo2_sector_allocation(const ReturnsPanel& returns, const SectorMap& sectors, const SimConfig& cfg);

struct SweepRow {
    std::size_t window = 0;
    std::size_t best = 0;
    double algo1_total = 0.0;
    double algo2_total = 0.0;
};

/// Every (S, B) pair, ordered by S then B ascending.
std::vector<SweepRow> sweep(const ReturnsPanel& returns, const SectorMap& sectors, std::vector<std::size_t> windows,
                            std::vector<std::size_t> bests, bool out_of_sample = false);

} // namespace marketstruct
