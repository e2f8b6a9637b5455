/**
 * @file mjw.hpp
 * @brief MJ-Wasserstein semi-metric between sets of changepoint distributions.
 *
 * For sets S and T of discrete distributions on the time line,
 *
 *     D(S, T) = ( sum_{g in T} d(g, S)^o / (2|T|) + sum_{f in S} d(f, T)^o / (2|S|) )^(1/o)
 *
 * where d(g, S) is the first Wasserstein distance from g to its nearest member of S.
 * The triangle inequality does not hold in general.
 */
#pragma once

#include "marketstruct/common.hpp"

#include <map>
#include <optional>
#include <span>

namespace marketstruct {

/// Probability mass by time index.
using Distribution = std::map<std::size_t, double>;

struct DistributionSet {
    std::string label;
    std::vector<Distribution> members;
    std::size_t series_length = 0;
};

/// Throws Error unless masses are non-negative and sum to 1 within 1e-12.
void validate_distribution(const Distribution& d);

/// W1 on the integer line: sum over t of |F(t) - G(t)|.
double wasserstein_1d(const Distribution& f, const Distribution& g);

double mjw_distance(const DistributionSet& s, const DistributionSet& t, double order = 1.0);

struct MjwOptions {
    double order = 1.0;
    /// Distance between an empty and a non-empty set. Defaults to the longer series length.
    std::optional<double> empty_penalty;
    /// Measure time as a fraction of each set's series length.
    bool normalize_time = false;
};

struct MjwMatrix {
    DistanceMatrix distances;
    std::vector<bool> empty;  // sets without changepoints, distance defined by the penalty
};

MjwMatrix mjw_matrix(std::span<const DistributionSet> sets, const MjwOptions& options = {});

} // namespace marketstruct
