/**
 * @file ingest.hpp
 * @brief Price snapshot loading, date alignment and log-return panels.
 *
 * Input files:
 *   prices  CSV  `date,ticker,close`          ISO-8601 dates, decimal closes
 *   sectors CSV  `ticker,asset_class,sector`  one row per (ticker, sector) pair
 *
 * Panels are aligned on the intersection of the dates observed for every
 * ticker and assets are sorted by ticker. Nothing is imputed.
 */
#pragma once

#include "marketstruct/common.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace marketstruct {

enum class AssetClass { crypto, equity };

std::string to_string(AssetClass c);
AssetClass asset_class_from_string(const std::string& s);

struct AssetMeta {
    std::string ticker;
    AssetClass asset_class = AssetClass::crypto;
    std::vector<std::string> sectors;  // sorted, unique, non-empty
};

struct PricePanel {
    std::vector<std::string> dates;  // strictly increasing
    std::vector<AssetMeta> assets;
    Matrix prices;                   // dates x assets, strictly positive

    std::size_t rows() const noexcept { return dates.size(); }
    std::size_t cols() const noexcept { return assets.size(); }
};

struct ReturnsPanel {
    std::vector<std::string> dates;  // date of the later price in each pair
    std::vector<AssetMeta> assets;
    Matrix returns;                  // (T-1) x N log returns

    std::size_t rows() const noexcept { return static_cast<std::size_t>(returns.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(returns.cols()); }
    std::vector<std::string> tickers() const;
    std::size_t column_of(const std::string& ticker) const;
};

struct PriceRow {
    std::string date;
    std::string ticker;
    double close = 0.0;
    std::size_t line = 0;
};

struct SectorRow {
    std::string ticker;
    AssetClass asset_class = AssetClass::crypto;
    std::string sector;
    std::size_t line = 0;
};

std::vector<PriceRow> read_price_csv(const std::filesystem::path& path);
std::vector<SectorRow> read_sector_csv(const std::filesystem::path& path);

/// Builds an aligned panel from parsed rows. Row order does not matter.
PricePanel align_prices(std::span<const PriceRow> prices, std::span<const SectorRow> sectors);

PricePanel load_prices(const std::filesystem::path& prices, const std::filesystem::path& sectors);

ReturnsPanel log_returns(const PricePanel& panel);

/// Standardises the S rows ending at row t (0-based, inclusive) to zero mean and
/// unit population standard deviation per column. Throws ZeroVarianceError.
Matrix standardize_window(const ReturnsPanel& returns, std::size_t window, std::size_t t);

/// Splits a panel into one sub-panel per sector; multi-sector assets are duplicated.
std::map<std::string, ReturnsPanel> sector_partition(const ReturnsPanel& returns);

ReturnsPanel select_columns(const ReturnsPanel& returns, std::span<const std::size_t> columns);
ReturnsPanel select_asset_class(const ReturnsPanel& returns, AssetClass cls);

void write_panel_json(const PricePanel& panel, const std::filesystem::path& path);
PricePanel read_panel_json(const std::filesystem::path& path);

} // namespace marketstruct
