#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "market.hpp"
#include "trainer.hpp"

namespace fxm {

// One line-delimited record per period: (epoch, period, active_ids, r_t,
// per-customer pi, discrete match m, decision M, period_welfare), stable field
// order.
void write_trace_jsonl(std::ostream& out, const EpochTrace& trace, std::uint64_t epoch_index);

// Learning-curve rows "epoch<TAB>welfare<TAB>running_avg" under a # header.
void write_curve_tsv(std::ostream& out, const std::vector<CurvePoint>& curve);
std::vector<CurvePoint> read_curve_tsv(std::istream& in);

// Stable float formatting shared by every text emitter.
std::string format_number(double v);

}  // namespace fxm
