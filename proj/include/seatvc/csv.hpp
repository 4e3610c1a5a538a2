#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "seatvc/records.hpp"

namespace seatvc::csv {

/**
 * @brief Serializes ad-day records as CSV.
 *
 * Header: ad_id,day,impressions,clicks,spend,conversions,items,sales,
 * position,klength,brand,retailer,holiday[,demand]. The demand column is
 * emitted only when every record carries demand >= 0. Floating-point fields
 * use shortest round-trip formatting, so write/read cycles are lossless and
 * output is locale-independent.
 */
void write_raw_csv(std::ostream& out, const std::vector<RawAdDay>& records);

/// Writes records to a file; throws InvalidInput when the file cannot be
/// opened.
void write_raw_csv_file(const std::string& path, const std::vector<RawAdDay>& records);

/**
 * @brief Parses ad-day records from CSV.
 *
 * The header row is validated against the schema above; the demand column is
 * optional and an absent column (or empty cell) stores demand = -1. The feed
 * carries no explicit cost-per-click, so avg_cpc is derived as spend/clicks
 * (0 when clickless). Malformed rows raise InvalidInput naming the 1-based
 * row number.
 */
std::vector<RawAdDay> read_raw_csv(std::istream& in);

/// Reads records from a file; throws InvalidInput when the file cannot be
/// opened.
std::vector<RawAdDay> read_raw_csv_file(const std::string& path);

}  // namespace seatvc::csv
