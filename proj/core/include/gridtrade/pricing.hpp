#pragma once

#include <span>

namespace gridtrade {

inline constexpr double kSdrCap = 100.0;

/// ESP tariffs plus the compensation price paid to sellers when supply exceeds
/// demand. Valid when 0 <= compensation <= import - export and import >= export >= 0.
struct PriceBounds {
    double esp_import = 0.05;   // lambda_b, GBP/kWh
    double esp_export = 0.03;   // lambda_s, GBP/kWh
    double compensation = 0.01; // lambda, GBP/kWh

    void validate() const;
};

struct SlotPrices {
    double sdr = 0.0;
    double buy = 0.0;  // pi_b
    double sell = 0.0; // pi_s
};

/// Community supply-to-demand ratio, sum(g + b) / sum(d), clamped to [0, kSdrCap].
/// Zero demand maps to kSdrCap when supply is positive and to 1 otherwise.
double compute_sdr(std::span<const double> supplies_kw, std::span<const double> demands_kw);

/// P2P buying and selling prices for one slot.
SlotPrices compute_prices(double sdr, const PriceBounds& bounds);

} // namespace gridtrade
