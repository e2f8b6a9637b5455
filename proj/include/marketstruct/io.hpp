#pragma once

#include "marketstruct/changepoint.hpp"
#include "marketstruct/mjw.hpp"
#include "marketstruct/portfolio.hpp"
#include "marketstruct/sectors.hpp"
#include "marketstruct/spectra.hpp"

#include <filesystem>

namespace marketstruct {

/// Shortest text that round-trips the double ("%.17g" trimmed).
std::string format_double(double v);

/// Writes content to path, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

std::string distance_matrix_csv(const DistanceMatrix& d);
DistanceMatrix parse_distance_matrix_csv(const std::string& csv);

std::string dendrogram_json(const Dendrogram& d, Linkage linkage);
Dendrogram parse_dendrogram_json(const std::string& text);

/// Header and rows of a comma-separated file without quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

/// One changepoint run on one series, as stored on disk.
struct PosteriorRecord {
    std::string label;   // sector or ticker the run represents
    std::string ticker;  // series actually sampled
    std::vector<double> series;
    RJMCMCConfig config;
    ChangepointPosterior posterior;
    MapSpectrumFit fit;
    MoveCounters counters;
};

PosteriorRecord make_posterior_record(std::string label, std::string ticker, std::span<const double> series,
                                      const RJMCMCConfig& cfg, const Chain& chain);

void write_posterior_json(const PosteriorRecord& r, const std::filesystem::path& path);
PosteriorRecord read_posterior_json(const std::filesystem::path& path);

/// Every `*.posterior.json` in a directory, ordered by label.
std::vector<PosteriorRecord> read_posterior_dir(const std::filesystem::path& dir);

/// `sweep,m,log_posterior` rows for every sweep of the chain.
std::string chain_summary_csv(const Chain& chain);

DistributionSet distribution_set(const PosteriorRecord& r);

std::string correlation_csv(const CorrelationMatrix& m);

/// `t,lambda1,nonrandom,lambda_plus,lambda_minus`
std::string rmt_series_csv(const EigenSpectrumSeries& s);

/// Wide form: `t,<sector>...`
std::string variance_paths_csv(std::span<const VariancePath> paths);

/// `window,best` followed by `<algo>_total,<algo>_pct` for each requested algorithm.
std::string sweep_csv(std::span<const SweepRow> rows, bool algo1 = true, bool algo2 = true);

/// Long-form surface: `t,nu,logpower`.
std::string surface_csv(const TVSpectrum& s);

} // namespace marketstruct
