#include "gridtrade/pricing.hpp"

#include "gridtrade/errors.hpp"

#include <algorithm>
#include <numeric>

namespace gridtrade {

void PriceBounds::validate() const {
    if (!(esp_export >= 0.0 && esp_import >= esp_export)) {
        throw ValidationError("ESP prices must satisfy import >= export >= 0");
    }
    if (!(compensation >= 0.0 && compensation <= esp_import - esp_export)) {
        throw ValidationError("compensation price must lie in [0, import - export]");
    }
}

double compute_sdr(std::span<const double> supplies_kw, std::span<const double> demands_kw) {
    if (supplies_kw.empty() || supplies_kw.size() != demands_kw.size()) {
        throw ShapeError("supply and demand lists must be non-empty and equally long");
    }
    const double supply = std::accumulate(supplies_kw.begin(), supplies_kw.end(), 0.0);
    const double demand = std::accumulate(demands_kw.begin(), demands_kw.end(), 0.0);
    if (demand <= 0.0) {
        return supply > 0.0 ? kSdrCap : 1.0;
    }
    return std::clamp(supply / demand, 0.0, kSdrCap);
}

SlotPrices compute_prices(double sdr, const PriceBounds& bounds) {
    const double lb = bounds.esp_import;
    const double ls = bounds.esp_export;
    const double lam = bounds.compensation;
    SlotPrices prices;
    prices.sdr = sdr;
    if (sdr <= 1.0) {
        const double denom = (lb - ls - lam) * sdr + ls + lam;
        // denom vanishes only when ls + lam == 0 and sdr == 0
        prices.sell = denom > 0.0 ? (ls + lam) * lb / denom : lb;
        prices.buy = prices.sell * sdr + lb * (1.0 - sdr);
    } else {
        prices.sell = ls + lam / sdr;
        prices.buy = ls + lam;
    }
    return prices;
}

} // namespace gridtrade
