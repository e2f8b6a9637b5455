#include "marketstruct/pipeline.hpp"

#include "marketstruct/io.hpp"
#include "marketstruct/parallel.hpp"
#include "marketstruct/plots.hpp"
#include "marketstruct/portfolio.hpp"
#include "marketstruct/spectra.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace marketstruct {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void say(const Logger& log, const std::string& stage, const std::string& msg) {
    if (log) log("[" + stage + "] " + msg);
}

template <class F>
auto stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

} // namespace

void PipelineConfig::validate() const {
    if (prices.empty() || !fs::is_regular_file(prices)) throw Error("prices file '" + prices.string() + "' does not exist");
    if (sectors.empty() || !fs::is_regular_file(sectors))
        throw Error("sectors file '" + sectors.string() + "' does not exist");
    if (output.empty()) throw Error("no output directory given");
    if (window < 2) throw Error("window must be at least 2");
    if (spectra_grid < 1) throw Error("spectra grid must have at least one point");
    if (!(mjw.order >= 1.0)) throw Error("MJ-Wasserstein order must be >= 1");
    if (sweep.windows.empty() || sweep.best.empty()) throw Error("portfolio sweep grids must be non-empty");
    for (auto s : sweep.windows)
        if (s < 2) throw Error("portfolio windows must be at least 2");
    for (auto b : sweep.best)
        if (b < 1) throw Error("portfolio B values must be at least 1");
    if (rjmcmc.iterations <= 0 || rjmcmc.burnin < 0 || rjmcmc.burnin >= rjmcmc.iterations)
        throw Error("RJMCMC burnin must satisfy 0 <= burnin < iterations");
}

PipelineConfig pipeline_config_from_json(const std::string& text, const fs::path& base_dir) {
    PipelineConfig c;
    try {
        const json j = json::parse(text);
        auto path_of = [&](const char* key) {
            fs::path p = j.at(key).get<std::string>();
            return p.is_absolute() ? p : base_dir / p;
        };
        if (j.contains("prices")) c.prices = path_of("prices");
        if (j.contains("sectors")) c.sectors = path_of("sectors");
        if (j.contains("output")) c.output = path_of("output");
        c.window = j.value("window", c.window);
        if (j.contains("linkage")) c.linkage = linkage_from_string(j["linkage"].get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.representatives = j.value("representatives", c.representatives);
        c.spectra_grid = j.value("spectra_grid", c.spectra_grid);
        c.plots = j.value("plots", c.plots);
        if (j.contains("rjmcmc")) {
            const auto& r = j["rjmcmc"];
            auto& k = c.rjmcmc;
            k.iterations = r.value("iterations", k.iterations);
            k.burnin = r.value("burnin", k.burnin);
            k.t_min = r.value("t_min", k.t_min);
            k.max_segments = r.value("max_segments", k.max_segments);
            k.n_basis = r.value("n_basis", k.n_basis);
            k.mix_pi = r.value("mix_pi", k.mix_pi);
            k.tau_shape = r.value("tau_shape", k.tau_shape);
            k.tau_scale = r.value("tau_scale", k.tau_scale);
            k.sigma0_sq = r.value("sigma0_sq", k.sigma0_sq);
        }
        if (j.contains("mjw")) {
            const auto& m = j["mjw"];
            c.mjw.order = m.value("order", c.mjw.order);
            c.mjw.normalize_time = m.value("normalize", c.mjw.normalize_time);
            if (m.contains("empty_penalty") && !m["empty_penalty"].is_null())
                c.mjw.empty_penalty = m["empty_penalty"].get<double>();
        }
        if (j.contains("sweep")) {
            const auto& s = j["sweep"];
            c.sweep.windows = s.value("windows", c.sweep.windows);
            c.sweep.best = s.value("best", c.sweep.best);
            c.sweep.out_of_sample = s.value("out_of_sample", c.sweep.out_of_sample);
        }
    } catch (const json::exception& e) {
        throw Error(std::string("malformed pipeline config: ") + e.what());
    }
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw Error("config file '" + path.string() + "' does not exist");
    return pipeline_config_from_json(read_text(path), fs::absolute(path).parent_path());
}

std::string representative_ticker(const ReturnsPanel& sector_panel, const std::string& sector,
                                  const std::map<std::string, std::string>& overrides) {
    if (sector_panel.cols() == 0) throw Error("sector '" + sector + "' has no assets");
    if (auto it = overrides.find(sector); it != overrides.end()) {
        sector_panel.column_of(it->second);
        return it->second;
    }
    auto tickers = sector_panel.tickers();
    return *std::min_element(tickers.begin(), tickers.end());
}

std::string rmt_spectrum_json(std::size_t t, const EigenSpectrum& spectrum, const MPBounds& bounds) {
    json j;
    j["t"] = t;
    j["q"] = bounds.q;
    j["sigma2"] = bounds.sigma2;
    j["lambda_minus"] = bounds.lambda_minus;
    j["lambda_plus"] = bounds.lambda_plus;
    j["nonrandom"] = count_nonrandom(spectrum, bounds);
    j["eigenvalues"] = std::vector<double>(spectrum.eigenvalues.data(),
                                           spectrum.eigenvalues.data() + spectrum.eigenvalues.size());
    j["reference_discrepancies"] = json::array();
    for (const auto& e : reference_edge_check()) {
        j["reference_discrepancies"].push_back({{"q", e.q},
                                                {"stated_lambda_plus", e.stated_lambda_plus},
                                                {"formula_lambda_plus", e.formula_lambda_plus},
                                                {"diverges", e.diverges}});
    }
    return j.dump(2) + "\n";
}

std::vector<Artifact> write_manifest(const fs::path& bundle) {
    std::vector<Artifact> out;
    for (const auto& e : fs::recursive_directory_iterator(bundle)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), bundle).generic_string();
        if (rel == "manifest.json") continue;
        out.push_back({rel, sha256_file(e.path()), e.file_size()});
    }
    std::sort(out.begin(), out.end(), [](const Artifact& a, const Artifact& b) { return a.path < b.path; });
    json j;
    j["artifacts"] = json::array();
    for (const auto& a : out) j["artifacts"].push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    write_text(bundle / "manifest.json", j.dump(2) + "\n");
    return out;
}

namespace {

void prepare_output(const fs::path& dir) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw Error("output '" + dir.string() + "' is not a directory");
        if (!fs::is_empty(dir)) {
            if (!fs::exists(dir / "manifest.json"))
                throw Error("output directory '" + dir.string() + "' is not empty and holds no previous bundle");
            for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
        }
    }
    fs::create_directories(dir);
}

struct ClassResult {
    json summary;
};

ClassResult analyse_class(const PipelineConfig& cfg, const ReturnsPanel& r, const std::string& cls,
                          std::size_t& series_index, const Logger& log) {
    const fs::path dir = cfg.output / cls;
    const std::size_t S = cfg.window;
    ClassResult res;
    res.summary["assets"] = r.cols();
    res.summary["returns"] = r.rows();

    stage("rollcorr", [&] {
        if (r.rows() < S) throw Error("panel has fewer rows than the window");
        RollingCorrelationSeries view(r, S);
        write_text(dir / "correlation_last.csv", correlation_csv(view[view.size() - 1]));
        say(log, "rollcorr", cls + ": " + std::to_string(view.size()) + " windows");
        return 0;
    });

    stage("rmt", [&] {
        const auto series = time_varying_rmt(r, S);
        write_text(dir / "rmt_series.csv", rmt_series_csv(series));
        const std::size_t t = series.times.back();
        const Matrix z = standardize_window(r, S, t);
        write_text(dir / "rmt_spectrum.json", rmt_spectrum_json(t, eigen_spectrum(gram_correlation(z)), series.bounds.back()));
        res.summary["rmt_windows"] = series.size();
        return 0;
    });

    const auto partition = sector_partition(r);

    stage("sectors", [&] {
        std::map<std::string, ReturnsPanel> usable;
        for (const auto& [name, panel] : partition) {
            if (panel.cols() < 2) {
                say(log, "sectors", cls + ": sector '" + name + "' has one asset, left out of the variance paths");
                res.summary["sectors_skipped"].push_back(name);
                continue;
            }
            usable.emplace(name, panel);
        }
        const auto paths = variance_paths(usable, S);
        if (paths.empty()) {
            say(log, "sectors", cls + ": no sector has two or more assets");
            return 0;
        }
        write_text(dir / "sector_paths.csv", variance_paths_csv(paths));
        const auto d = path_distance_matrix(paths);
        write_text(dir / "sector_distances.csv", distance_matrix_csv(d));
        if (d.size() >= 2)
            write_text(dir / "sector_dendrogram.json", dendrogram_json(agglomerative_cluster(d, cfg.linkage), cfg.linkage));
        return 0;
    });

    std::vector<PosteriorRecord> records(partition.size());
    stage("changepoints", [&] {
        std::vector<std::pair<std::string, std::string>> jobs;
        for (const auto& [name, panel] : partition)
            jobs.emplace_back(name, representative_ticker(panel, name, cfg.representatives));
        const std::size_t base = series_index;
        series_index += jobs.size();
        std::vector<std::string> chains(jobs.size());
        detail::parallel_for(jobs.size(), [&](std::size_t k) {
            RJMCMCConfig c = cfg.rjmcmc;
            c.seed = derive_seed(cfg.seed, base + k);
            const auto col = r.returns.col(static_cast<Eigen::Index>(r.column_of(jobs[k].second)));
            const std::vector<double> x(col.data(), col.data() + col.size());
            const Chain chain = run_rjmcmc(x, c);
            records[k] = make_posterior_record(jobs[k].first, jobs[k].second, x, c, chain);
            chains[k] = chain_summary_csv(chain);
        });
        for (std::size_t k = 0; k < jobs.size(); ++k) {
            write_posterior_json(records[k], dir / "changepoints" / (jobs[k].first + ".posterior.json"));
            write_text(dir / "changepoints" / (jobs[k].first + ".chain.csv"), chains[k]);
            say(log, "changepoints", cls + "/" + jobs[k].first + " (" + jobs[k].second +
                                         "): MAP m = " + std::to_string(records[k].posterior.map_m));
            res.summary["map_m"][jobs[k].first] = records[k].posterior.map_m;
        }
        return 0;
    });

    stage("spectra", [&] {
        const Vector grid = frequency_grid(cfg.spectra_grid);
        std::vector<TVSpectrum> surfaces;
        std::vector<std::string> labels;
        for (const auto& rec : records) {
            surfaces.push_back(tv_spectrum(rec.fit, grid));
            labels.push_back(rec.label);
            write_text(dir / "spectra" / (rec.label + ".surface.csv"), surface_csv(surfaces.back()));
        }
        const auto d = spectral_distance_matrix(surfaces, labels);
        write_text(dir / "spectral_distances.csv", distance_matrix_csv(d));
        if (d.size() >= 2)
            write_text(dir / "spectral_dendrogram.json",
                       dendrogram_json(agglomerative_cluster(d, cfg.linkage), cfg.linkage));
        return 0;
    });

    stage("mjw", [&] {
        std::vector<DistributionSet> sets;
        for (const auto& rec : records) sets.push_back(distribution_set(rec));
        const auto m = mjw_matrix(sets, cfg.mjw);
        write_text(dir / "mjw_distances.csv", distance_matrix_csv(m.distances));
        json j;
        j["order"] = cfg.mjw.order;
        j["normalize_time"] = cfg.mjw.normalize_time;
        j["empty_penalty"] = cfg.mjw.empty_penalty ? json(*cfg.mjw.empty_penalty) : json("series length");
        j["empty_sets"] = json::array();
        for (std::size_t i = 0; i < sets.size(); ++i)
            if (m.empty[i]) j["empty_sets"].push_back(sets[i].label);
        write_text(dir / "mjw_report.json", j.dump(2) + "\n");
        if (m.distances.size() >= 2)
            write_text(dir / "mjw_dendrogram.json",
                       dendrogram_json(agglomerative_cluster(m.distances, cfg.linkage), cfg.linkage));
        return 0;
    });

    stage("portfolio", [&] {
        const auto sectors = sector_map_from_panel(r);
        auto write_sweep = [&](bool oos, const std::string& name) {
            const auto rows = sweep(r, sectors, cfg.sweep.windows, cfg.sweep.best, oos);
            write_text(dir / name, sweep_csv(rows));
        };
        write_sweep(false, "portfolio_sweep.csv");
        if (cfg.sweep.out_of_sample) write_sweep(true, "portfolio_sweep_oos.csv");
        return 0;
    });
    return res;
}

} // namespace

PipelineReport run_pipeline(const PipelineConfig& cfg, const Logger& log) {
    stage("config", [&] {
        cfg.validate();
        return 0;
    });
    const PricePanel prices = stage("ingest", [&] { return load_prices(cfg.prices, cfg.sectors); });
    stage("ingest", [&] {
        prepare_output(cfg.output);
        return 0;
    });
    const ReturnsPanel returns = stage("ingest", [&] { return log_returns(prices); });
    say(log, "ingest", std::to_string(prices.rows()) + " dates x " + std::to_string(prices.cols()) + " assets");

    json report;
    report["window"] = cfg.window;
    report["seed"] = cfg.seed;
    report["linkage"] = to_string(cfg.linkage);
    report["spectra_grid"] = cfg.spectra_grid;
    report["reference_discrepancies"] = json::array();
    for (const auto& e : reference_edge_check())
        report["reference_discrepancies"].push_back({{"q", e.q},
                                                     {"stated_lambda_plus", e.stated_lambda_plus},
                                                     {"formula_lambda_plus", e.formula_lambda_plus},
                                                     {"diverges", e.diverges}});
    std::size_t series_index = 0;
    for (AssetClass cls : {AssetClass::crypto, AssetClass::equity}) {
        const bool present = std::any_of(returns.assets.begin(), returns.assets.end(),
                                         [&](const AssetMeta& a) { return a.asset_class == cls; });
        if (!present) continue;
        const ReturnsPanel sub = select_asset_class(returns, cls);
        report["classes"][to_string(cls)] = analyse_class(cfg, sub, to_string(cls), series_index, log).summary;
    }
    write_text(cfg.output / "report.json", report.dump(2) + "\n");

    if (cfg.plots) emit_plots(cfg.output, log);

    PipelineReport out;
    out.bundle = cfg.output;
    out.artifacts = stage("manifest", [&] { return write_manifest(cfg.output); });
    say(log, "manifest", std::to_string(out.artifacts.size()) + " artifacts");
    return out;
}

std::vector<fs::path> emit_plots(const fs::path& bundle, const Logger& log) {
    if (!fs::is_directory(bundle)) throw Error("bundle '" + bundle.string() + "' is not a directory");
    std::vector<fs::path> written;
    const fs::path out = bundle / "plots";
    auto attempt = [&](const std::string& name, const fs::path& input, auto&& render) {
        if (!fs::exists(input)) {
            say(log, "plots", "skipping " + name + ": " + fs::relative(input, bundle).generic_string() + " not found");
            return;
        }
        try {
            const fs::path target = out / (name + ".svg");
            write_text(target, render());
            written.push_back(target);
        } catch (const std::exception& e) {
            say(log, "plots", "failed " + name + ": " + e.what());
        }
    };

    int grid = 64;
    if (fs::exists(bundle / "report.json")) {
        try {
            grid = json::parse(read_text(bundle / "report.json")).value("spectra_grid", grid);
        } catch (const std::exception& e) {
            say(log, "plots", std::string("unreadable report.json, using a 64-point grid: ") + e.what());
        }
    }

    std::vector<std::string> classes;
    for (const auto& e : fs::directory_iterator(bundle))
        if (e.is_directory() && e.path().filename() != "plots") classes.push_back(e.path().filename().string());
    std::sort(classes.begin(), classes.end());

    for (const auto& cls : classes) {
        const fs::path dir = bundle / cls;
        attempt(cls + "_eigen_density", dir / "rmt_spectrum.json", [&] {
            const json j = json::parse(read_text(dir / "rmt_spectrum.json"));
            const auto ev = j.at("eigenvalues").get<std::vector<double>>();
            const MPBounds b = mp_bounds(j.at("q").get<double>(), j.at("sigma2").get<double>());
            return density_svg(density_plot_data(Eigen::Map<const Vector>(ev.data(), static_cast<Eigen::Index>(ev.size())), b),
                               cls + ": eigenvalue density at t = " + std::to_string(j.at("t").get<std::size_t>()));
        });
        attempt(cls + "_lambda1", dir / "rmt_series.csv", [&] {
            const auto t = parse_csv(read_text(dir / "rmt_series.csv"));
            Line l1{"lambda1", {}, {}}, edge{"lambda_plus", {}, {}};
            for (const auto& row : t.rows) {
                const double x = std::stod(row[t.column("t")]);
                l1.x.push_back(x);
                l1.y.push_back(std::stod(row[t.column("lambda1")]));
                edge.x.push_back(x);
                edge.y.push_back(std::stod(row[t.column("lambda_plus")]));
            }
            const Line lines[] = {l1, edge};
            return lines_svg(lines, cls + ": dominant eigenvalue", "eigenvalue");
        });
        attempt(cls + "_nonrandom", dir / "rmt_series.csv", [&] {
            const auto t = parse_csv(read_text(dir / "rmt_series.csv"));
            Line n{"non-random eigenvalues", {}, {}};
            for (const auto& row : t.rows) {
                n.x.push_back(std::stod(row[t.column("t")]));
                n.y.push_back(std::stod(row[t.column("nonrandom")]));
            }
            return lines_svg(std::span<const Line>(&n, 1), cls + ": eigenvalues above lambda_plus", "count");
        });
        attempt(cls + "_sector_paths", dir / "sector_paths.csv", [&] {
            const auto t = parse_csv(read_text(dir / "sector_paths.csv"));
            std::vector<Line> lines;
            for (std::size_t c = 1; c < t.header.size(); ++c) {
                Line l{t.header[c], {}, {}};
                for (const auto& row : t.rows) {
                    l.x.push_back(std::stod(row[0]));
                    l.y.push_back(std::stod(row[c]));
                }
                lines.push_back(std::move(l));
            }
            return lines_svg(lines, cls + ": explanatory variance by sector", "lambda1 / sum");
        });
        for (const auto& [file, title] : std::vector<std::pair<std::string, std::string>>{
                 {"sector_dendrogram", "explanatory variance distance"},
                 {"spectral_dendrogram", "time-varying spectrum distance"},
                 {"mjw_dendrogram", "MJ-Wasserstein distance"}}) {
            attempt(cls + "_" + file, dir / (file + ".json"), [&] {
                return dendrogram_svg(parse_dendrogram_json(read_text(dir / (file + ".json"))), cls + ": " + title);
            });
        }
        const fs::path cp = dir / "changepoints";
        if (!fs::is_directory(cp)) {
            say(log, "plots", "skipping " + cls + " changepoint and spectrum plots: no changepoints directory");
            continue;
        }
        std::vector<PosteriorRecord> records;
        try {
            records = read_posterior_dir(cp);
        } catch (const std::exception& e) {
            say(log, "plots", std::string("skipping ") + cls + " changepoint plots: " + e.what());
        }
        for (const auto& rec : records) {
            attempt(cls + "_changepoints_" + rec.label, cp / (rec.label + ".posterior.json"), [&] {
                return changepoint_svg(rec.series, rec.posterior.distributions,
                                       cls + "/" + rec.label + " (" + rec.ticker + "): MAP m = " +
                                           std::to_string(rec.posterior.map_m));
            });
            attempt(cls + "_spectrum_" + rec.label, cp / (rec.label + ".posterior.json"), [&] {
                return surface_svg(tv_spectrum(rec.fit, frequency_grid(grid)), cls + "/" + rec.label + ": log power");
            });
        }
    }
    return written;
}

} // namespace marketstruct
