#pragma once

#include "marketstruct/rmt.hpp"

#include <map>

namespace marketstruct {

/// Explanatory variance of a sector's dominant correlation eigenvalue over time.
struct VariancePath {
    std::string sector;
    std::vector<std::size_t> times;
    std::vector<double> values;
};

std::vector<VariancePath> variance_paths(const std::map<std::string, ReturnsPanel>& sector_panels,
                                         std::size_t window);

/// Mean absolute difference between two aligned paths.
double l1_path_distance(const VariancePath& a, const VariancePath& b);

DistanceMatrix path_distance_matrix(std::span<const VariancePath> paths);

enum class Linkage { average, single, complete };

std::string to_string(Linkage l);
Linkage linkage_from_string(const std::string& s);

/// One agglomeration step. Leaves are 0..n-1 (label order); merge k creates cluster n+k.
struct Merge {
    std::size_t a = 0;
    std::size_t b = 0;
    double height = 0.0;
    std::size_t size = 0;
};

struct Dendrogram {
    std::vector<std::string> labels;
    std::vector<Merge> merges;

    /// Leaf order for drawing, left to right.
    std::vector<std::size_t> leaf_order() const;
};

/// Agglomerative clustering on a precomputed distance matrix. Ties between equal
/// inter-cluster distances go to the pair whose smallest labels sort first.
Dendrogram agglomerative_cluster(const DistanceMatrix& d, Linkage linkage = Linkage::average);

} // namespace marketstruct
