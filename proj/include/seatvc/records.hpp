#pragma once

#include <cstdint>
#include <string>

namespace seatvc {

/**
 * @brief One ad-day of raw campaign accounting.
 *
 * Counts must satisfy clicks <= impressions and conversions <= clicks;
 * ad_position >= 1 whenever the ad was shown. `demand` is the day's search
 * volume for the ad's keyword; a value < 0 means the feed did not carry a
 * demand column.
 */
struct RawAdDay {
    std::string ad_id;
    int day_index = 0;
    std::int64_t impressions = 0;
    std::int64_t clicks = 0;
    double spend = 0.0;         ///< advertising expenditure, currency units
    double avg_cpc = 0.0;       ///< currency per click
    std::int64_t conversions = 0;
    std::int64_t items_ordered = 0;
    std::int64_t sales_units = 0;
    double ad_position = 1.0;   ///< average rank, 1 = top
    int klength = 1;            ///< keyword word count
    int brand_flag = 0;
    int retailer_flag = 0;
    int holiday_flag = 0;
    std::int64_t demand = -1;   ///< search volume; < 0 when absent
};

}  // namespace seatvc
