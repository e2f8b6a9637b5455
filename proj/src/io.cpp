#include "marketstruct/io.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace marketstruct {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) {
    const std::string bytes = read_text(path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw Error("SHA-256 failed for '" + path.string() + "'");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string distance_matrix_csv(const DistanceMatrix& d) {
    std::string out = "label";
    for (const auto& l : d.labels) out += "," + l;
    out += "\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        out += d.labels[i];
        for (std::size_t j = 0; j < d.size(); ++j)
            out += "," + format_double(d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out += "\n";
    }
    return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

} // namespace

DistanceMatrix parse_distance_matrix_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty distance matrix CSV");
    auto header = split(line, ',');
    if (header.empty() || header[0] != "label") throw Error("distance matrix CSV must start with a 'label' column");
    DistanceMatrix d;
    d.labels.assign(header.begin() + 1, header.end());
    const auto n = static_cast<Eigen::Index>(d.labels.size());
    d.values = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw Error("distance matrix CSV has too few rows");
        auto cells = split(line, ',');
        if (static_cast<Eigen::Index>(cells.size()) != n + 1 || cells[0] != d.labels[static_cast<std::size_t>(i)])
            throw Error("malformed distance matrix row " + std::to_string(i + 2));
        for (Eigen::Index j = 0; j < n; ++j) d.values(i, j) = std::stod(cells[static_cast<std::size_t>(j) + 1]);
    }
    return d;
}

std::string dendrogram_json(const Dendrogram& d, Linkage linkage) {
    json j;
    j["linkage"] = to_string(linkage);
    j["labels"] = d.labels;
    j["merges"] = json::array();
    for (const auto& m : d.merges) j["merges"].push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.size}});
    std::vector<std::string> order;
    for (auto i : d.leaf_order()) order.push_back(d.labels[i]);
    j["leaf_order"] = order;
    return j.dump(2) + "\n";
}

Dendrogram parse_dendrogram_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        Dendrogram d;
        d.labels = j.at("labels").get<std::vector<std::string>>();
        for (const auto& m : j.at("merges"))
            d.merges.push_back({m.at("a").get<std::size_t>(), m.at("b").get<std::size_t>(), m.at("height").get<double>(),
                                m.at("size").get<std::size_t>()});
        const std::size_t n = d.labels.size();
        for (std::size_t k = 0; k < d.merges.size(); ++k)
            if (d.merges[k].a >= n + k || d.merges[k].b >= n + k) throw Error("merge refers to a later cluster");
        return d;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed dendrogram JSON: ") + e.what());
    }
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw Error("CSV has no column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    CsvTable t;
    if (!std::getline(in, line)) throw Error("empty CSV");
    t.header = split(line, ',');
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() != t.header.size())
            throw Error("CSV row " + std::to_string(t.rows.size() + 2) + " has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

namespace {

json config_json(const RJMCMCConfig& c) {
    return {{"iterations", c.iterations}, {"burnin", c.burnin},         {"t_min", c.t_min},
            {"max_segments", c.max_segments}, {"n_basis", c.n_basis},   {"mix_pi", c.mix_pi},
            {"seed", c.seed},             {"tau_shape", c.tau_shape}, {"tau_scale", c.tau_scale},
            {"sigma0_sq", c.sigma0_sq}};
}

RJMCMCConfig config_from_json(const json& j) {
    RJMCMCConfig c;
    c.iterations = j.at("iterations").get<int>();
    c.burnin = j.at("burnin").get<int>();
    c.t_min = j.at("t_min").get<int>();
    c.max_segments = j.at("max_segments").get<int>();
    c.n_basis = j.at("n_basis").get<int>();
    c.mix_pi = j.at("mix_pi").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.tau_shape = j.at("tau_shape").get<double>();
    c.tau_scale = j.at("tau_scale").get<double>();
    c.sigma0_sq = j.at("sigma0_sq").get<double>();
    return c;
}

} // namespace

PosteriorRecord make_posterior_record(std::string label, std::string ticker, std::span<const double> series,
                                      const RJMCMCConfig& cfg, const Chain& chain) {
    PosteriorRecord r;
    r.label = std::move(label);
    r.ticker = std::move(ticker);
    r.series.assign(series.begin(), series.end());
    r.config = cfg;
    r.posterior = extract_posterior(chain, cfg);
    r.fit = map_spectrum_fit(r.posterior, chain);
    r.counters = chain.counters;
    return r;
}

void write_posterior_json(const PosteriorRecord& r, const std::filesystem::path& path) {
    json j;
    j["label"] = r.label;
    j["ticker"] = r.ticker;
    j["T"] = r.series.size();
    j["map_m"] = r.posterior.map_m;
    j["distributions"] = json::array();
    for (const auto& d : r.posterior.distributions) {
        json dj = json::object();
        for (const auto& [t, p] : d) dj[std::to_string(t)] = p;
        j["distributions"].push_back(dj);
    }
    j["boundaries"] = r.fit.boundaries;
    j["beta_mean"] = json::array();
    for (const auto& b : r.fit.beta_mean) j["beta_mean"].push_back(std::vector<double>(b.data(), b.data() + b.size()));
    j["config"] = config_json(r.config);
    const auto& c = r.counters;
    j["moves"] = {{"birth_proposed", c.birth_proposed}, {"birth_accepted", c.birth_accepted},
                  {"death_proposed", c.death_proposed}, {"death_accepted", c.death_accepted},
                  {"within_proposed", c.within_proposed}, {"within_accepted", c.within_accepted},
                  {"between_skipped", c.between_skipped}};
    j["series"] = r.series;
    write_text(path, j.dump(2) + "\n");
}

PosteriorRecord read_posterior_json(const std::filesystem::path& path) {
    try {
        const json j = json::parse(read_text(path));
        PosteriorRecord r;
        r.label = j.at("label").get<std::string>();
        r.ticker = j.at("ticker").get<std::string>();
        r.series = j.at("series").get<std::vector<double>>();
        r.config = config_from_json(j.at("config"));
        r.posterior.map_m = j.at("map_m").get<int>();
        for (const auto& dj : j.at("distributions")) {
            Distribution d;
            for (const auto& [k, v] : dj.items()) d[std::stoul(k)] = v.get<double>();
            r.posterior.distributions.push_back(std::move(d));
        }
        r.fit.series_length = r.series.size();
        r.fit.boundaries = j.at("boundaries").get<std::vector<std::size_t>>();
        for (const auto& bj : j.at("beta_mean")) {
            const auto v = bj.get<std::vector<double>>();
            r.fit.beta_mean.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        if (j.at("T").get<std::size_t>() != r.series.size()) throw Error("'T' does not match the stored series");
        const auto& mv = j.at("moves");
        r.counters.birth_proposed = mv.at("birth_proposed");
        r.counters.birth_accepted = mv.at("birth_accepted");
        r.counters.death_proposed = mv.at("death_proposed");
        r.counters.death_accepted = mv.at("death_accepted");
        r.counters.within_proposed = mv.at("within_proposed");
        r.counters.within_accepted = mv.at("within_accepted");
        r.counters.between_skipped = mv.at("between_skipped");
        return r;
    } catch (const json::exception& e) {
        throw Error("malformed posterior file '" + path.string() + "': " + e.what());
    }
}

std::vector<PosteriorRecord> read_posterior_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("'" + dir.string() + "' is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.size() > 15 && name.ends_with(".posterior.json")) files.push_back(e.path());
    }
    std::vector<PosteriorRecord> out;
    for (const auto& f : files) out.push_back(read_posterior_json(f));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
    if (out.empty()) throw Error("no *.posterior.json files in '" + dir.string() + "'");
    return out;
}

std::string chain_summary_csv(const Chain& chain) {
    std::string out = "sweep,m,log_posterior\n";
    for (std::size_t i = 0; i < chain.segments.size(); ++i)
        out += std::to_string(i) + "," + std::to_string(chain.segments[i]) + "," + format_double(chain.log_posterior[i]) + "\n";
    return out;
}

DistributionSet distribution_set(const PosteriorRecord& r) {
    return {r.label, r.posterior.distributions, r.series.size()};
}

std::string correlation_csv(const CorrelationMatrix& m) {
    std::string csv = "ticker";
    for (const auto& t : m.tickers) csv += "," + t;
    csv += "\n";
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        csv += m.tickers[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) csv += "," + format_double(m.values(i, j));
        csv += "\n";
    }
    return csv;
}

std::string rmt_series_csv(const EigenSpectrumSeries& s) {
    std::string csv = "t,lambda1,nonrandom,lambda_plus,lambda_minus\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        csv += std::to_string(s.times[i]) + "," + format_double(s.lambda1_path[i]) + "," +
               std::to_string(s.nonrandom_counts[i]) + "," + format_double(s.bounds[i].lambda_plus) + "," +
               format_double(s.bounds[i].lambda_minus) + "\n";
    return csv;
}

std::string variance_paths_csv(std::span<const VariancePath> paths) {
    std::string csv = "t";
    for (const auto& p : paths) csv += "," + p.sector;
    csv += "\n";
    if (paths.empty()) return csv;
    for (std::size_t i = 0; i < paths.front().times.size(); ++i) {
        csv += std::to_string(paths.front().times[i]);
        for (const auto& p : paths) csv += "," + format_double(p.values[i]);
        csv += "\n";
    }
    return csv;
}

std::string sweep_csv(std::span<const SweepRow> rows, bool algo1, bool algo2) {
    std::string csv = "window,best";
    if (algo1) csv += ",algo1_total,algo1_pct";
    if (algo2) csv += ",algo2_total,algo2_pct";
    csv += "\n";
    for (const auto& r : rows) {
        csv += std::to_string(r.window) + "," + std::to_string(r.best);
        if (algo1) csv += "," + format_double(r.algo1_total) + "," + format_double(100.0 * r.algo1_total);
        if (algo2) csv += "," + format_double(r.algo2_total) + "," + format_double(100.0 * r.algo2_total);
        csv += "\n";
    }
    return csv;
}

std::string surface_csv(const TVSpectrum& s) {
    std::string out = "t,nu,logpower\n";
    for (Eigen::Index t = 0; t < s.surface.rows(); ++t)
        for (Eigen::Index k = 0; k < s.surface.cols(); ++k)
            out += std::to_string(t) + "," + format_double(s.freqs(k)) + "," + format_double(s.surface(t, k)) + "\n";
    return out;
}

} // namespace marketstruct
