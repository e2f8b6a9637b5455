// Command-line front end: one subcommand per analysis stage plus `pipeline` and `plots`.

#include "marketstruct/io.hpp"
#include "marketstruct/parallel.hpp"
#include "marketstruct/pipeline.hpp"
#include "marketstruct/plots.hpp"
#include "marketstruct/portfolio.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using namespace marketstruct;

namespace {

void log_line(const std::string& s) {
    std::cerr << s << '\n';
}

ReturnsPanel load_returns(const fs::path& panel, const std::string& asset_class) {
    ReturnsPanel r = log_returns(read_panel_json(panel));
    if (!asset_class.empty()) r = select_asset_class(r, asset_class_from_string(asset_class));
    return r;
}

std::vector<std::size_t> parse_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        std::size_t used = 0;
        const unsigned long v = std::stoul(item, &used);
        if (used != item.size()) throw Error("'" + item + "' is not a whole number");
        out.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::string file_label(std::string s) {
    for (char& c : s)
        if (c == '/' || c == '\\' || c == ' ') c = '_';
    return s;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Market structure analysis: correlation eigenspectra, sector clustering, spectral changepoints and "
                 "portfolio simulations over asset-price panels"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load and align price and sector CSVs into a panel JSON");
    fs::path prices, sectors_file, out;
    ingest->add_option("--prices", prices, "CSV with header date,ticker,close")->required();
    ingest->add_option("--sectors", sectors_file, "CSV with header ticker,asset_class,sector")->required();
    ingest->add_option("--out", out, "Panel JSON to write")->required();

    // rollcorr
    auto* rollcorr = app.add_subcommand("rollcorr", "Write the correlation matrix of every rolling window");
    fs::path panel;
    std::size_t window = 150;
    std::string asset_class;
    rollcorr->add_option("--panel", panel, "Panel JSON from `ingest`")->required();
    rollcorr->add_option("--window", window, "Window length S")->capture_default_str();
    rollcorr->add_option("--asset-class", asset_class, "Restrict to crypto or equity");
    rollcorr->add_option("--out", out, "Directory for corr_<t>.csv files")->required();

    // rmt
    auto* rmt = app.add_subcommand("rmt", "Rolling eigenspectrum against the Marchenko-Pastur edges");
    fs::path plot;
    rmt->add_option("--panel", panel, "Panel JSON from `ingest`")->required();
    rmt->add_option("--window", window, "Window length S")->capture_default_str();
    rmt->add_option("--asset-class", asset_class, "Restrict to crypto or equity");
    rmt->add_option("--out", out, "Series CSV to write")->required();
    rmt->add_option("--plot", plot, "Density SVG of the final window; path plots are written next to it");

    // sectors
    auto* sectors = app.add_subcommand("sectors", "Sector explanatory-variance paths, distances and dendrogram");
    std::string linkage = "average";
    sectors->add_option("--panel", panel, "Panel JSON from `ingest`")->required();
    sectors->add_option("--window", window, "Window length S")->capture_default_str();
    sectors->add_option("--linkage", linkage, "average, single or complete")->capture_default_str();
    sectors->add_option("--asset-class", asset_class, "Restrict to crypto or equity");
    sectors->add_option("--out", out, "Output directory")->required();

    // changepoints
    auto* changepoints = app.add_subcommand("changepoints", "RJMCMC spectral changepoint detection on return series");
    RJMCMCConfig rj;
    std::vector<std::string> series;
    bool all_sectors = false;
    std::string representative;
    changepoints->add_option("--panel", panel, "Panel JSON from `ingest`")->required();
    changepoints->add_option("--series", series,
                             "Ticker, or sector name (sampled through its representative ticker); repeatable");
    changepoints->add_flag("--all-sectors", all_sectors, "Run every sector of the panel");
    changepoints->add_option("--representative", representative,
                             "Ticker representing a single --series sector instead of the first alphabetically");
    changepoints->add_option("--iterations", rj.iterations, "Total sweeps")->capture_default_str();
    changepoints->add_option("--burnin", rj.burnin, "Discarded sweeps")->capture_default_str();
    changepoints->add_option("--tmin", rj.t_min, "Minimum segment length")->capture_default_str();
    changepoints->add_option("--max-segments", rj.max_segments, "Maximum number of segments M")->capture_default_str();
    changepoints->add_option("--basis", rj.n_basis, "Cosine basis functions per segment J")->capture_default_str();
    changepoints->add_option("--mix-pi", rj.mix_pi, "Weight of the long-range relocation proposal")->capture_default_str();
    changepoints->add_option("--seed", rj.seed,
                             "RNG seed; with several series, series k uses a seed derived from this and k")
        ->capture_default_str();
    changepoints->add_option("--asset-class", asset_class, "Restrict to crypto or equity");
    changepoints->add_option("--out", out, "Output directory")->required();

    // spectra
    auto* spectra = app.add_subcommand("spectra", "Time-varying log-power surfaces and their distance matrix");
    fs::path posteriors;
    int grid = 64;
    spectra->add_option("--posteriors", posteriors, "Directory of *.posterior.json files")->required();
    spectra->add_option("--grid", grid, "Frequency grid size on [0, 0.5]")->capture_default_str();
    spectra->add_option("--linkage", linkage, "average, single or complete")->capture_default_str();
    spectra->add_option("--out", out, "Output directory")->required();

    // mjw
    auto* mjw = app.add_subcommand("mjw", "MJ-Wasserstein distances between changepoint posteriors");
    double order = 1.0;
    bool normalize = false;
    std::optional<double> penalty;
    mjw->add_option("--posteriors", posteriors, "Directory of *.posterior.json files")->required();
    mjw->add_option("--order", order, "Polynomial order o >= 1")->capture_default_str();
    mjw->add_flag("--normalize", normalize, "Measure time as a fraction of each series' length");
    mjw->add_option("--empty-penalty", penalty,
                    "Distance between a series without changepoints and one with (default: series length)");
    mjw->add_option("--linkage", linkage, "average, single or complete")->capture_default_str();
    mjw->add_option("--out", out, "Distance matrix CSV; a _report.json and _dendrogram.json are written beside it")
        ->required();

    // portfolio
    auto* portfolio = app.add_subcommand("portfolio", "Security selection and sector allocation sweeps");
    std::string algo = "both", windows = "120,150,180", bests = "2,3,4,5";
    bool oos = false;
    portfolio->add_option("--panel", panel, "Panel JSON from `ingest`")->required();
    portfolio->add_option("--sectors", sectors_file, "Sector CSV overriding the panel's sector membership");
    portfolio->add_option("--algo", algo, "1, 2 or both")->check(CLI::IsMember({"1", "2", "both"}))->capture_default_str();
    portfolio->add_option("--windows", windows, "Comma-separated S values")->capture_default_str();
    portfolio->add_option("--best", bests, "Comma-separated B values")->capture_default_str();
    portfolio->add_flag("--oos", oos, "Select on [t-S, t] and realise the return of t+1");
    portfolio->add_option("--asset-class", asset_class, "Restrict to crypto or equity");
    portfolio->add_option("--out", out, "Table CSV to write")->required();

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage and write a hashed bundle");
    fs::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> p_window;
    std::optional<int> iterations, burnin;
    bool no_plots = false;
    pipeline->add_option("--config", config, std::string("Pipeline JSON (default: $") + kConfigEnvVar + ")");
    pipeline->add_option("--prices", prices, "Override the prices CSV");
    pipeline->add_option("--sectors", sectors_file, "Override the sectors CSV");
    pipeline->add_option("--out", out, "Override the output directory");
    pipeline->add_option("--window", p_window, "Override the window S");
    pipeline->add_option("--seed", seed, "Override the master seed");
    pipeline->add_option("--iterations", iterations, "Override RJMCMC sweeps");
    pipeline->add_option("--burnin", burnin, "Override RJMCMC burn-in");
    pipeline->add_option("--linkage", linkage, "Override the clustering linkage");
    pipeline->add_flag("--no-plots", no_plots, "Skip SVG rendering");

    // plots
    auto* plots = app.add_subcommand("plots", "Render SVG figures for an existing bundle");
    fs::path bundle;
    plots->add_option("--bundle", bundle, "Bundle directory written by `pipeline`")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            const auto p = load_prices(prices, sectors_file);
            write_panel_json(p, out);
            log_line("panel: " + std::to_string(p.rows()) + " dates x " + std::to_string(p.cols()) + " assets -> " +
                     out.string());
        } else if (rollcorr->parsed()) {
            const auto r = load_returns(panel, asset_class);
            const auto mats = rolling_correlation_series(r, window);
            for (const auto& m : mats) {
                char name[32];
                std::snprintf(name, sizeof name, "corr_%06zu.csv", m.t);
                write_text(out / name, correlation_csv(m));
            }
            log_line(std::to_string(mats.size()) + " correlation matrices -> " + out.string());
        } else if (rmt->parsed()) {
            const auto r = load_returns(panel, asset_class);
            const auto s = time_varying_rmt(r, window);
            write_text(out, rmt_series_csv(s));
            for (const auto& e : reference_edge_check())
                if (e.diverges)
                    log_line("note: published lambda_plus " + format_double(e.stated_lambda_plus) + " for Q = " +
                             format_double(e.q) + " differs from the formula value " +
                             format_double(e.formula_lambda_plus));
            if (!plot.empty()) {
                const std::size_t t = s.times.back();
                const auto spectrum = eigen_spectrum(gram_correlation(standardize_window(r, window, t)));
                write_text(plot, density_svg(density_plot_data(spectrum.eigenvalues, s.bounds.back()),
                                             "eigenvalue density at t = " + std::to_string(t)));
                Line l1{"lambda1", {}, s.lambda1_path}, edge{"lambda_plus", {}, {}}, count{"non-random", {}, {}};
                for (std::size_t i = 0; i < s.size(); ++i) {
                    const auto x = static_cast<double>(s.times[i]);
                    l1.x.push_back(x);
                    edge.x.push_back(x);
                    edge.y.push_back(s.bounds[i].lambda_plus);
                    count.x.push_back(x);
                    count.y.push_back(s.nonrandom_counts[i]);
                }
                const Line both[] = {l1, edge};
                const fs::path stem = plot.parent_path() / plot.stem();
                write_text(stem.string() + "_lambda1.svg", lines_svg(both, "dominant eigenvalue", "eigenvalue"));
                write_text(stem.string() + "_nonrandom.svg",
                           lines_svg(std::span<const Line>(&count, 1), "eigenvalues above lambda_plus", "count"));
            }
        } else if (sectors->parsed()) {
            const auto r = load_returns(panel, asset_class);
            const auto link = linkage_from_string(linkage);
            const auto paths = variance_paths(sector_partition(r), window);
            write_text(out / "sector_paths.csv", variance_paths_csv(paths));
            const auto d = path_distance_matrix(paths);
            write_text(out / "sector_distances.csv", distance_matrix_csv(d));
            const auto dendro = agglomerative_cluster(d, link);
            write_text(out / "sector_dendrogram.json", dendrogram_json(dendro, link));
            write_text(out / "sector_dendrogram.svg", dendrogram_svg(dendro, "explanatory variance distance"));
        } else if (changepoints->parsed()) {
            const auto r = load_returns(panel, asset_class);
            const auto partition = sector_partition(r);
            if (all_sectors)
                for (const auto& [name, sub] : partition) series.push_back(name);
            if (series.empty()) throw Error("give --series or --all-sectors");
            std::vector<std::pair<std::string, std::string>> jobs;  // label, ticker
            const auto tickers = r.tickers();
            for (const auto& s : series) {
                if (std::find(tickers.begin(), tickers.end(), s) != tickers.end()) {
                    jobs.emplace_back(s, s);
                } else if (auto it = partition.find(s); it != partition.end()) {
                    std::map<std::string, std::string> overrides;
                    if (!representative.empty() && series.size() == 1) overrides[s] = representative;
                    jobs.emplace_back(s, representative_ticker(it->second, s, overrides));
                } else {
                    throw Error("'" + s + "' is neither a ticker nor a sector of the panel");
                }
            }
            std::vector<PosteriorRecord> records(jobs.size());
            std::vector<Chain> chains(jobs.size());
            detail::parallel_for(jobs.size(), [&](std::size_t k) {
                RJMCMCConfig c = rj;
                if (jobs.size() > 1) c.seed = derive_seed(rj.seed, k);
                const auto col = r.returns.col(static_cast<Eigen::Index>(r.column_of(jobs[k].second)));
                const std::vector<double> x(col.data(), col.data() + col.size());
                chains[k] = run_rjmcmc(x, c);
                records[k] = make_posterior_record(jobs[k].first, jobs[k].second, x, c, chains[k]);
            });
            for (std::size_t k = 0; k < jobs.size(); ++k) {
                const auto label = file_label(jobs[k].first);
                write_posterior_json(records[k], out / (label + ".posterior.json"));
                write_text(out / (label + ".chain.csv"), chain_summary_csv(chains[k]));
                write_text(out / (label + ".svg"),
                           changepoint_svg(records[k].series, records[k].posterior.distributions,
                                           jobs[k].first + " (" + jobs[k].second +
                                               "): MAP m = " + std::to_string(records[k].posterior.map_m)));
                log_line(jobs[k].first + " (" + jobs[k].second + "): MAP m = " +
                         std::to_string(records[k].posterior.map_m));
            }
        } else if (spectra->parsed()) {
            const auto records = read_posterior_dir(posteriors);
            const auto link = linkage_from_string(linkage);
            const Vector freqs = frequency_grid(grid);
            std::vector<TVSpectrum> surfaces;
            std::vector<std::string> labels;
            for (const auto& rec : records) {
                surfaces.push_back(tv_spectrum(rec.fit, freqs));
                labels.push_back(rec.label);
                const auto label = file_label(rec.label);
                write_text(out / (label + ".surface.csv"), surface_csv(surfaces.back()));
                write_text(out / (label + ".surface.svg"), surface_svg(surfaces.back(), rec.label + ": log power"));
            }
            const auto d = spectral_distance_matrix(surfaces, labels);
            write_text(out / "spectral_distances.csv", distance_matrix_csv(d));
            if (d.size() >= 2) {
                const auto dendro = agglomerative_cluster(d, link);
                write_text(out / "spectral_dendrogram.json", dendrogram_json(dendro, link));
                write_text(out / "spectral_dendrogram.svg", dendrogram_svg(dendro, "time-varying spectrum distance"));
            }
        } else if (mjw->parsed()) {
            const auto records = read_posterior_dir(posteriors);
            std::vector<DistributionSet> sets;
            for (const auto& rec : records) sets.push_back(distribution_set(rec));
            MjwOptions opts{order, penalty, normalize};
            const auto m = mjw_matrix(sets, opts);
            write_text(out, distance_matrix_csv(m.distances));
            nlohmann::json report;
            report["order"] = order;
            report["normalize_time"] = normalize;
            report["empty_penalty"] = penalty ? nlohmann::json(*penalty) : nlohmann::json("series length");
            report["empty_sets"] = nlohmann::json::array();
            for (std::size_t i = 0; i < sets.size(); ++i)
                if (m.empty[i]) {
                    report["empty_sets"].push_back(sets[i].label);
                    log_line("note: '" + sets[i].label + "' has no changepoints; its distances use the empty-set penalty");
                }
            const fs::path stem = out.parent_path() / out.stem();
            write_text(stem.string() + "_report.json", report.dump(2) + "\n");
            if (m.distances.size() >= 2) {
                const auto link = linkage_from_string(linkage);
                write_text(stem.string() + "_dendrogram.json",
                           dendrogram_json(agglomerative_cluster(m.distances, link), link));
            }
        } else if (portfolio->parsed()) {
            const auto r = load_returns(panel, asset_class);
            SectorMap map;
            if (sectors_file.empty()) {
                map = sector_map_from_panel(r);
            } else {
                const auto tickers = r.tickers();
                for (const auto& row : read_sector_csv(sectors_file))
                    if (std::find(tickers.begin(), tickers.end(), row.ticker) != tickers.end())
                        map[row.sector].push_back(row.ticker);
            }
            const auto rows = sweep(r, map, parse_list(windows), parse_list(bests), oos);
            write_text(out, sweep_csv(rows, algo != "2", algo != "1"));
            for (const auto& w : algo1_security_selection(r, map, {rows.front().window, rows.front().best, oos}).warnings)
                log_line("warning: " + w);
        } else if (pipeline->parsed()) {
            if (config.empty())
                if (const char* env = std::getenv(kConfigEnvVar)) config = env;
            PipelineConfig cfg = config.empty() ? PipelineConfig{} : load_pipeline_config(config);
            if (!prices.empty()) cfg.prices = prices;
            if (!sectors_file.empty()) cfg.sectors = sectors_file;
            if (!out.empty()) cfg.output = out;
            if (p_window) cfg.window = *p_window;
            if (seed) cfg.seed = *seed;
            if (iterations) cfg.rjmcmc.iterations = *iterations;
            if (burnin) cfg.rjmcmc.burnin = *burnin;
            if (pipeline->count("--linkage")) cfg.linkage = linkage_from_string(linkage);
            if (no_plots) cfg.plots = false;
            const auto report = run_pipeline(cfg, log_line);
            std::cout << (report.bundle / "manifest.json").string() << '\n';
        } else if (plots->parsed()) {
            for (const auto& p : emit_plots(bundle, log_line)) std::cout << p.string() << '\n';
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
