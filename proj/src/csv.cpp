#include "seatvc/csv.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <system_error>

#include "seatvc/errors.hpp"

namespace seatvc::csv {

namespace {

constexpr std::array<std::string_view, 13> kBaseColumns = {
    "ad_id",    "day",     "impressions", "clicks",  "spend",
    "conversions", "items", "sales",       "position", "klength",
    "brand",    "retailer", "holiday",
};
constexpr std::string_view kDemandColumn = "demand";

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw NumericalError("failed to format floating-point value");
    return std::string(buf.data(), ptr);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::int64_t parse_int(std::string_view field, int row, std::string_view column) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw InvalidInput("row " + std::to_string(row) + ": column '" + std::string(column) +
                           "' is not an integer: '" + std::string(field) + "'");
    return value;
}

double parse_double(std::string_view field, int row, std::string_view column) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw InvalidInput("row " + std::to_string(row) + ": column '" + std::string(column) +
                           "' is not a number: '" + std::string(field) + "'");
    return value;
}

}  // namespace

void write_raw_csv(std::ostream& out, const std::vector<RawAdDay>& records) {
    bool with_demand = !records.empty();
    for (const RawAdDay& r : records) with_demand = with_demand && r.demand >= 0;

    for (std::size_t i = 0; i < kBaseColumns.size(); ++i) {
        if (i > 0) out << ',';
        out << kBaseColumns[i];
    }
    if (with_demand) out << ',' << kDemandColumn;
    out << '\n';

    for (const RawAdDay& r : records) {
        if (r.ad_id.find_first_of(",\"\r\n") != std::string::npos)
            throw InvalidInput("ad_id contains a CSV delimiter: '" + r.ad_id + "'");
        out << r.ad_id << ',' << r.day_index << ',' << r.impressions << ',' << r.clicks << ','
            << format_double(r.spend) << ',' << r.conversions << ',' << r.items_ordered << ','
            << r.sales_units << ',' << format_double(r.ad_position) << ',' << r.klength << ','
            << r.brand_flag << ',' << r.retailer_flag << ',' << r.holiday_flag;
        if (with_demand) out << ',' << r.demand;
        out << '\n';
    }
}

void write_raw_csv_file(const std::string& path, const std::vector<RawAdDay>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open for writing: " + path);
    write_raw_csv(out, records);
    out.flush();
    if (!out) throw InvalidInput("failed while writing: " + path);
}

std::vector<RawAdDay> read_raw_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("no rows: input is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_fields(line);
    bool with_demand = false;
    if (header.size() == kBaseColumns.size() + 1 && header.back() == kDemandColumn) {
        with_demand = true;
    } else if (header.size() != kBaseColumns.size()) {
        throw InvalidInput("row 1: header has " + std::to_string(header.size()) +
                           " columns, expected " + std::to_string(kBaseColumns.size()) +
                           " (plus optional 'demand')");
    }
    for (std::size_t i = 0; i < kBaseColumns.size(); ++i) {
        if (header[i] != kBaseColumns[i])
            throw InvalidInput("row 1: column " + std::to_string(i + 1) + " is '" +
                               std::string(header[i]) + "', expected '" +
                               std::string(kBaseColumns[i]) + "'");
    }

    const std::size_t want = kBaseColumns.size() + (with_demand ? 1 : 0);
    std::vector<RawAdDay> records;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != want)
            throw InvalidInput("row " + std::to_string(row) + ": has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(want));
        RawAdDay r;
        r.ad_id = std::string(fields[0]);
        if (r.ad_id.empty()) throw InvalidInput("row " + std::to_string(row) + ": empty ad_id");
        r.day_index = static_cast<int>(parse_int(fields[1], row, "day"));
        r.impressions = parse_int(fields[2], row, "impressions");
        r.clicks = parse_int(fields[3], row, "clicks");
        r.spend = parse_double(fields[4], row, "spend");
        r.conversions = parse_int(fields[5], row, "conversions");
        r.items_ordered = parse_int(fields[6], row, "items");
        r.sales_units = parse_int(fields[7], row, "sales");
        r.ad_position = parse_double(fields[8], row, "position");
        r.klength = static_cast<int>(parse_int(fields[9], row, "klength"));
        r.brand_flag = static_cast<int>(parse_int(fields[10], row, "brand"));
        r.retailer_flag = static_cast<int>(parse_int(fields[11], row, "retailer"));
        r.holiday_flag = static_cast<int>(parse_int(fields[12], row, "holiday"));
        if (with_demand && !fields[13].empty())
            r.demand = parse_int(fields[13], row, "demand");
        else
            r.demand = -1;
        r.avg_cpc = r.clicks > 0 ? r.spend / static_cast<double>(r.clicks) : 0.0;
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<RawAdDay> read_raw_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open for reading: " + path);
    return read_raw_csv(in);
}

}  // namespace seatvc::csv
