#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distreal/network.hpp"

namespace distreal {

struct LutEntry {
    DropoutVector d;
    double expected_fwd_macs = 0.0;  // per sample
};

// Pareto-optimal dropout vectors with their expected forward MACs, sorted
// strictly ascending by MACs. The fingerprint ties the table to the network
// it was searched for.
struct ParetoLUT {
    std::vector<LutEntry> entries;
    std::uint64_t fingerprint = 0;

    std::size_t vector_length() const { return entries.empty() ? 0 : entries[0].d.size(); }
    void validate() const;  // ordering + uniform vector lengths
};

// Max-fit: the entry with the largest expected training MACs
// (training_factor * forward) not exceeding the budget; falls back to the
// smallest entry when nothing fits. Budget is per sample. O(log n).
const LutEntry& lookup(const ParetoLUT& lut, double per_batch_mac_budget,
                       double training_factor = 2.0, bool* fell_back = nullptr);

void save_lut(const ParetoLUT& lut, const std::string& path);
// Refuses tables whose fingerprint does not match `expect` (when given).
ParetoLUT load_lut(const std::string& path, const NetworkSpec* expect = nullptr);
void export_lut_csv(const ParetoLUT& lut, const std::string& path);

}  // namespace distreal
