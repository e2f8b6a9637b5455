#include "marketstruct/mjw.hpp"
#include "marketstruct/pipeline.hpp"
#include "marketstruct/portfolio.hpp"
#include "marketstruct/spectra.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace marketstruct;

namespace {

ReturnsPanel panel_from(const Matrix& returns, std::vector<std::string> tickers,
                        const std::map<std::string, std::vector<std::string>>& sectors = {}) {
    if (tickers.empty())
        for (Eigen::Index c = 0; c < returns.cols(); ++c) tickers.push_back("c" + std::to_string(c));
    if (static_cast<Eigen::Index>(tickers.size()) != returns.cols())
        throw Error("need one ticker per column of the returns matrix");
    ReturnsPanel p;
    p.returns = returns;
    for (Eigen::Index r = 0; r < returns.rows(); ++r) p.dates.push_back(std::to_string(r));
    for (const auto& t : tickers) {
        AssetMeta a{t, AssetClass::crypto, {}};
        for (const auto& [sector, members] : sectors)
            if (std::find(members.begin(), members.end(), t) != members.end()) a.sectors.push_back(sector);
        if (a.sectors.empty()) a.sectors.push_back("all");
        p.assets.push_back(std::move(a));
    }
    return p;
}

RJMCMCConfig rjmcmc_config(int iterations, int burnin, int t_min, int max_segments, int n_basis, double mix_pi,
                           std::uint64_t seed) {
    RJMCMCConfig cfg;
    cfg.iterations = iterations;
    cfg.burnin = burnin;
    cfg.t_min = t_min;
    cfg.max_segments = max_segments;
    cfg.n_basis = n_basis;
    cfg.mix_pi = mix_pi;
    cfg.seed = seed;
    return cfg;
}

py::dict sim_dict(const SimResult& r) {
    py::dict d;
    d["times"] = r.times;
    d["per_t"] = r.per_t;
    d["total"] = r.total;
    d["selections"] = r.selections;
    d["warnings"] = r.warnings;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Market structure analysis: correlation spectra, changepoints and portfolio rules";
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.def("mp_bounds", [](double q, double sigma2) {
        const auto b = mp_bounds(q, sigma2);
        return py::make_tuple(b.lambda_minus, b.lambda_plus);
    }, py::arg("q"), py::arg("sigma2") = 1.0, "Marchenko-Pastur support (lambda_minus, lambda_plus).");

    m.def("mp_density", [](double x, double q, double sigma2) { return mp_density(x, mp_bounds(q, sigma2)); },
          py::arg("x"), py::arg("q"), py::arg("sigma2") = 1.0);

    m.def("eigen_spectrum", [](const Matrix& corr) {
        const auto s = eigen_spectrum(corr);
        return py::make_tuple(Vector(s.eigenvalues), Vector(s.weights));
    }, py::arg("correlation"), "Descending eigenvalues and their shares of the trace.");

    m.def("rolling_correlation", [](const Matrix& returns, std::size_t window, std::size_t t) {
        return rolling_correlation(panel_from(returns, {}), window, t).values;
    }, py::arg("returns"), py::arg("window"), py::arg("t"));

    m.def("time_varying_rmt", [](const Matrix& returns, std::size_t window) {
        const auto s = time_varying_rmt(panel_from(returns, {}), window);
        std::vector<double> lp;
        for (const auto& b : s.bounds) lp.push_back(b.lambda_plus);
        py::dict d;
        d["t"] = s.times;
        d["lambda1"] = s.lambda1_path;
        d["lambda1_share"] = s.lambda1_weight_path;
        d["nonrandom"] = s.nonrandom_counts;
        d["lambda_plus"] = lp;
        return d;
    }, py::arg("returns"), py::arg("window"));

    m.def("reference_edge_check", [] {
        py::list out;
        for (const auto& e : reference_edge_check()) {
            py::dict d;
            d["q"] = e.q;
            d["stated_lambda_plus"] = e.stated_lambda_plus;
            d["formula_lambda_plus"] = e.formula_lambda_plus;
            d["diverges"] = e.diverges;
            out.append(d);
        }
        return out;
    });

    m.def("cluster", [](const Matrix& distances, std::vector<std::string> labels, const std::string& linkage) {
        DistanceMatrix d{std::move(labels), distances};
        const auto dg = agglomerative_cluster(d, linkage_from_string(linkage));
        py::list merges;
        for (const auto& mg : dg.merges) merges.append(py::make_tuple(mg.a, mg.b, mg.height, mg.size));
        return py::make_tuple(merges, dg.leaf_order());
    }, py::arg("distances"), py::arg("labels"), py::arg("linkage") = "average",
       "Agglomerative clustering; returns (merges as (a, b, height, size), leaf order).");

    m.def("periodogram", [](const std::vector<double>& x, bool demean) {
        return Vector(demean ? demeaned_periodogram(x).power : periodogram(x).power);
    }, py::arg("x"), py::arg("demean") = true);

    m.def("whittle_loglik", [](const std::vector<double>& x, const Vector& beta) { return segment_loglik(x, beta); },
          py::arg("x"), py::arg("beta"));

    m.def("changepoints", [](const std::vector<double>& x, int iterations, int burnin, int t_min, int max_segments,
                             int n_basis, double mix_pi, std::uint64_t seed, int grid) {
        const auto cfg = rjmcmc_config(iterations, burnin, t_min, max_segments, n_basis, mix_pi, seed);
        Chain chain;
        {
            py::gil_scoped_release release;
            chain = run_rjmcmc(x, cfg);
        }
        const auto post = extract_posterior(chain, cfg);
        const auto surface = tv_spectrum(x, post, chain, grid);
        py::dict d;
        d["map_m"] = post.map_m;
        d["distributions"] = post.distributions;
        d["segments"] = chain.segments;
        d["log_posterior"] = chain.log_posterior;
        d["freqs"] = Vector(surface.freqs);
        d["surface"] = Matrix(surface.surface);
        return d;
    }, py::arg("x"), py::arg("iterations") = 10000, py::arg("burnin") = 5000, py::arg("t_min") = 40,
       py::arg("max_segments") = 10, py::arg("n_basis") = 10, py::arg("mix_pi") = 0.8, py::arg("seed") = 0,
       py::arg("grid") = 64);

    m.def("wasserstein_1d", &wasserstein_1d, py::arg("f"), py::arg("g"));

    m.def("mjw_distance", [](std::vector<Distribution> s, std::vector<Distribution> t, double order) {
        return mjw_distance({"s", std::move(s), 0}, {"t", std::move(t), 0}, order);
    }, py::arg("s"), py::arg("t"), py::arg("order") = 1.0);

    m.def("algo1_security_selection", [](const Matrix& returns, std::vector<std::string> tickers, const SectorMap& sectors,
                                         std::size_t window, std::size_t best, bool oos) {
        return sim_dict(algo1_security_selection(panel_from(returns, std::move(tickers), sectors), sectors, {window, best, oos}));
    }, py::arg("returns"), py::arg("tickers"), py::arg("sectors"), py::arg("window") = 150, py::arg("best") = 2,
       py::arg("out_of_sample") = false);

    m.def("algo2_sector_allocation", [](const Matrix& returns, std::vector<std::string> tickers, const SectorMap& sectors,
                                        std::size_t window, std::size_t best, bool oos) {
        return sim_dict(algo2_sector_allocation(panel_from(returns, std::move(tickers), sectors), sectors, {window, best, oos}));
    }, py::arg("returns"), py::arg("tickers"), py::arg("sectors"), py::arg("window") = 150, py::arg("best") = 2,
       py::arg("out_of_sample") = false);

    m.def("run_pipeline", [](const std::filesystem::path& config, std::optional<std::filesystem::path> output,
                             std::optional<int> iterations, std::optional<int> burnin, bool plots) {
        auto cfg = load_pipeline_config(config);
        if (output) cfg.output = *output;
        if (iterations) cfg.rjmcmc.iterations = *iterations;
        if (burnin) cfg.rjmcmc.burnin = *burnin;
        cfg.plots = plots;
        PipelineReport report;
        {
            py::gil_scoped_release release;
            report = run_pipeline(cfg);
        }
        py::list artifacts;
        for (const auto& a : report.artifacts) artifacts.append(py::make_tuple(a.path, a.sha256, a.bytes));
        return artifacts;
    }, py::arg("config"), py::arg("output") = py::none(), py::arg("iterations") = py::none(),
       py::arg("burnin") = py::none(), py::arg("plots") = true,
       "Runs every stage from a JSON config and returns the manifest entries (path, sha256, bytes).");
}
