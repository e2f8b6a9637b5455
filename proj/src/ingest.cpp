#include "marketstruct/ingest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace marketstruct {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

bool valid_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    int y = 0;
    unsigned m = 0, d = 0;
    auto parse = [&](std::size_t off, std::size_t len, auto& v) {
        auto [p, ec] = std::from_chars(s.data() + off, s.data() + off + len, v);
        return ec == std::errc{} && p == s.data() + off + len;
    };
    if (!parse(0, 4, y) || !parse(5, 2, m) || !parse(8, 2, d)) return false;
    return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}.ok();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               const std::vector<std::string>& header) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error("'" + path.string() + "' is empty");
    if (split_csv_line(line) != header) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        throw Error("'" + path.string() + "': expected header '" + expected + "'");
    }
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            rows.emplace_back();
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw Error("'" + path.string() + "' line " + std::to_string(rows.size() + 2) + ": expected " +
                        std::to_string(header.size()) + " fields");
        rows.push_back(std::move(fields));
    }
    return rows;
}

} // namespace

std::string to_string(AssetClass c) {
    return c == AssetClass::crypto ? "crypto" : "equity";
}

AssetClass asset_class_from_string(const std::string& s) {
    if (s == "crypto") return AssetClass::crypto;
    if (s == "equity") return AssetClass::equity;
    throw Error("unknown asset class '" + s + "' (expected crypto or equity)");
}

std::vector<std::string> ReturnsPanel::tickers() const {
    std::vector<std::string> out;
    out.reserve(assets.size());
    for (const auto& a : assets) out.push_back(a.ticker);
    return out;
}

std::size_t ReturnsPanel::column_of(const std::string& ticker) const {
    for (std::size_t i = 0; i < assets.size(); ++i)
        if (assets[i].ticker == ticker) return i;
    throw Error("ticker '" + ticker + "' not in panel");
}

std::vector<PriceRow> read_price_csv(const std::filesystem::path& path) {
    const auto raw = read_csv(path, {"date", "ticker", "close"});
    std::vector<PriceRow> rows;
    rows.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].empty()) continue;
        const std::size_t line = i + 2;
        PriceRow row{raw[i][0], raw[i][1], 0.0, line};
        const auto& text = raw[i][2];
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), row.close);
        if (ec != std::errc{} || p != text.data() + text.size())
            throw Error("prices line " + std::to_string(line) + ": cannot parse close '" + text + "'");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SectorRow> read_sector_csv(const std::filesystem::path& path) {
    const auto raw = read_csv(path, {"ticker", "asset_class", "sector"});
    std::vector<SectorRow> rows;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].empty()) continue;
        const std::size_t line = i + 2;
        if (raw[i][0].empty() || raw[i][2].empty())
            throw Error("sectors line " + std::to_string(line) + ": empty ticker or sector");
        rows.push_back({raw[i][0], asset_class_from_string(raw[i][1]), raw[i][2], line});
    }
    return rows;
}

PricePanel align_prices(std::span<const PriceRow> prices, std::span<const SectorRow> sectors) {
    std::map<std::string, AssetMeta> meta;
    for (const auto& s : sectors) {
        auto [it, inserted] = meta.try_emplace(s.ticker, AssetMeta{s.ticker, s.asset_class, {}});
        if (!inserted && it->second.asset_class != s.asset_class)
            throw Error("sector map line " + std::to_string(s.line) + ": conflicting asset class for '" +
                        s.ticker + "'");
        it->second.sectors.push_back(s.sector);
    }
    for (auto& [_, m] : meta) {
        std::sort(m.sectors.begin(), m.sectors.end());
        m.sectors.erase(std::unique(m.sectors.begin(), m.sectors.end()), m.sectors.end());
    }

    std::map<std::string, std::map<std::string, double>> series;  // ticker -> date -> close
    for (const auto& p : prices) {
        if (p.ticker.empty()) throw Error("prices line " + std::to_string(p.line) + ": empty ticker");
        if (!valid_iso_date(p.date))
            throw Error("prices line " + std::to_string(p.line) + ": invalid ISO-8601 date '" + p.date + "'");
        if (!(p.close > 0.0) || !std::isfinite(p.close))
            throw Error("non-positive price " + std::to_string(p.close) + " for " + p.ticker + " on " + p.date +
                        " (line " + std::to_string(p.line) + ")");
        if (!meta.contains(p.ticker))
            throw Error("ticker '" + p.ticker + "' (prices line " + std::to_string(p.line) +
                        ") is unknown to the sector map");
        if (!series[p.ticker].emplace(p.date, p.close).second)
            throw Error("duplicate price for " + p.ticker + " on " + p.date);
    }
    for (const auto& [ticker, _] : meta)
        if (!series.contains(ticker)) throw Error("sector map lists '" + ticker + "' but it has no prices");
    if (series.empty()) throw Error("no price rows");

    std::vector<std::string> common;
    for (const auto& [date, _] : series.begin()->second) common.push_back(date);
    for (const auto& [ticker, byDate] : series) {
        std::erase_if(common, [&](const std::string& d) { return !byDate.contains(d); });
    }
    if (common.empty()) throw Error("empty date intersection across tickers");

    PricePanel panel;
    panel.dates = common;
    for (const auto& [ticker, _] : series) panel.assets.push_back(meta.at(ticker));
    panel.prices.resize(static_cast<Eigen::Index>(common.size()), static_cast<Eigen::Index>(panel.assets.size()));
    Eigen::Index j = 0;
    for (const auto& [ticker, byDate] : series) {
        for (std::size_t t = 0; t < common.size(); ++t) panel.prices(static_cast<Eigen::Index>(t), j) = byDate.at(common[t]);
        ++j;
    }
    return panel;
}

PricePanel load_prices(const std::filesystem::path& prices, const std::filesystem::path& sectors) {
    if (!std::filesystem::exists(sectors)) throw Error("sector map '" + sectors.string() + "' does not exist");
    const auto sectorRows = read_sector_csv(sectors);
    const auto priceRows = read_price_csv(prices);
    return align_prices(priceRows, sectorRows);
}

ReturnsPanel log_returns(const PricePanel& panel) {
    if (panel.rows() < 2) throw Error("need at least two dates to form returns");
    ReturnsPanel out;
    out.dates.assign(panel.dates.begin() + 1, panel.dates.end());
    out.assets = panel.assets;
    const auto T = panel.prices.rows();
    out.returns = (panel.prices.bottomRows(T - 1).array() / panel.prices.topRows(T - 1).array()).log().matrix();
    return out;
}

Matrix standardize_window(const ReturnsPanel& returns, std::size_t window, std::size_t t) {
    if (window < 2) throw Error("window must be at least 2");
    if (t >= returns.rows() || t + 1 < window)
        throw Error("window of " + std::to_string(window) + " rows ending at t=" + std::to_string(t) +
                    " does not fit a panel of " + std::to_string(returns.rows()) + " rows");
    const auto S = static_cast<Eigen::Index>(window);
    Matrix z = returns.returns.middleRows(static_cast<Eigen::Index>(t) - S + 1, S);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double mean = z.col(j).mean();
        z.col(j).array() -= mean;
        const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(S));
        if (!(sd > 0.0) || sd <= 1e-14 * std::max(1.0, std::abs(mean)))
            throw ZeroVarianceError(returns.assets[static_cast<std::size_t>(j)].ticker, t);
        z.col(j) /= sd;
    }
    return z;
}

ReturnsPanel select_columns(const ReturnsPanel& returns, std::span<const std::size_t> columns) {
    ReturnsPanel out;
    out.dates = returns.dates;
    out.returns.resize(returns.returns.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        out.assets.push_back(returns.assets.at(columns[k]));
        out.returns.col(static_cast<Eigen::Index>(k)) = returns.returns.col(static_cast<Eigen::Index>(columns[k]));
    }
    return out;
}

ReturnsPanel select_asset_class(const ReturnsPanel& returns, AssetClass cls) {
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < returns.assets.size(); ++i)
        if (returns.assets[i].asset_class == cls) cols.push_back(i);
    return select_columns(returns, cols);
}

std::map<std::string, ReturnsPanel> sector_partition(const ReturnsPanel& returns) {
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < returns.assets.size(); ++i)
        for (const auto& s : returns.assets[i].sectors) members[s].push_back(i);
    std::map<std::string, ReturnsPanel> out;
    for (const auto& [sector, cols] : members) out.emplace(sector, select_columns(returns, cols));
    return out;
}

void write_panel_json(const PricePanel& panel, const std::filesystem::path& path) {
    nlohmann::json j;
    j["dates"] = panel.dates;
    j["assets"] = nlohmann::json::array();
    for (const auto& a : panel.assets)
        j["assets"].push_back({{"ticker", a.ticker}, {"asset_class", to_string(a.asset_class)}, {"sectors", a.sectors}});
    auto& rows = j["prices"] = nlohmann::json::array();
    for (Eigen::Index t = 0; t < panel.prices.rows(); ++t) {
        std::vector<double> row;
        for (Eigen::Index i = 0; i < panel.prices.cols(); ++i) row.push_back(panel.prices(t, i));
        rows.push_back(row);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(1) << '\n';
}

PricePanel read_panel_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open panel '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed panel '" + path.string() + "': " + e.what());
    }
    PricePanel panel;
    panel.dates = j.at("dates").get<std::vector<std::string>>();
    for (const auto& a : j.at("assets"))
        panel.assets.push_back({a.at("ticker").get<std::string>(),
                                asset_class_from_string(a.at("asset_class").get<std::string>()),
                                a.at("sectors").get<std::vector<std::string>>()});
    const auto& rows = j.at("prices");
    if (rows.size() != panel.dates.size()) throw Error("panel '" + path.string() + "': row count mismatch");
    panel.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(panel.assets.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != panel.assets.size()) throw Error("panel '" + path.string() + "': ragged price row");
        for (std::size_t i = 0; i < panel.assets.size(); ++i) {
            const double p = rows[t][i].get<double>();
            if (!(p > 0.0)) throw Error("non-positive price for " + panel.assets[i].ticker + " on " + panel.dates[t]);
            panel.prices(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = p;
        }
    }
    for (std::size_t t = 1; t < panel.dates.size(); ++t)
        if (!(panel.dates[t - 1] < panel.dates[t])) throw Error("panel dates are not strictly increasing");
    return panel;
}

} // namespace marketstruct
