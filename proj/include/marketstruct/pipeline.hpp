/**
 * @file pipeline.hpp
 * @brief End-to-end batch run: ingest, rolling correlation, RMT, sector clustering,
 *        changepoints, spectra, MJ-Wasserstein distances and portfolio sweep.
 *
 * Each asset class in the panel is analysed separately under `<output>/<class>/`.
 * A `manifest.json` at the bundle root lists every file with its SHA-256. Nothing
 * time-dependent is written, so identical inputs give identical bundles.
 */
#pragma once

#include "marketstruct/changepoint.hpp"
#include "marketstruct/ingest.hpp"
#include "marketstruct/mjw.hpp"
#include "marketstruct/sectors.hpp"

#include <filesystem>
#include <functional>

namespace marketstruct {

inline constexpr const char* kConfigEnvVar = "MARKETSTRUCT_CONFIG";

struct SweepGrid {
    std::vector<std::size_t> windows{120, 150, 180};
    std::vector<std::size_t> best{2, 3, 4, 5};
    bool out_of_sample = false;
};

struct PipelineConfig {
    std::filesystem::path prices;
    std::filesystem::path sectors;
    std::filesystem::path output;
    std::size_t window = 150;
    Linkage linkage = Linkage::average;
    RJMCMCConfig rjmcmc;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> representatives;  // sector -> ticker
    int spectra_grid = 64;
    MjwOptions mjw;
    SweepGrid sweep;
    bool plots = true;

    /// Throws Error if input files are missing or numeric fields are out of range.
    void validate() const;
};

/// Reads a JSON config; relative paths are resolved against the file's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig pipeline_config_from_json(const std::string& text, const std::filesystem::path& base_dir);

/// An error raised inside a named pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct Artifact {
    std::string path;  // relative to the bundle root, '/' separated
    std::string sha256;
    std::uintmax_t bytes = 0;
};

using Logger = std::function<void(const std::string&)>;

struct PipelineReport {
    std::filesystem::path bundle;
    std::vector<Artifact> artifacts;
};

PipelineReport run_pipeline(const PipelineConfig& cfg, const Logger& log = {});

/// Lists every file under the bundle (except the manifest itself) and writes manifest.json.
std::vector<Artifact> write_manifest(const std::filesystem::path& bundle);

/// Renders SVGs for whatever stages exist in the bundle; missing stages are skipped and logged.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& bundle, const Logger& log = {});

/// Series used to represent a sector: the override if given, else the first ticker alphabetically.
std::string representative_ticker(const ReturnsPanel& sector_panel, const std::string& sector,
                                  const std::map<std::string, std::string>& overrides = {});

/// JSON report of the final-window spectrum against the Marchenko-Pastur edges, including
/// the reference-versus-formula edge comparison under `reference_discrepancies`.
std::string rmt_spectrum_json(std::size_t t, const EigenSpectrum& spectrum, const MPBounds& bounds);

} // namespace marketstruct
