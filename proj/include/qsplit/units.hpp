#pragma once

#include <cmath>

namespace qsplit {

/// W = 10^((dBm - 30) / 10)
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

}  // namespace qsplit
