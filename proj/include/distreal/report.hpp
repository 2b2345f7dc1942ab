#pragma once

#include <string>
#include <vector>

#include "distreal/experiment.hpp"

namespace distreal {

struct TechniqueSummary {
    std::string technique;
    int runs = 0;
    double mean_final = 0.0, std_final = 0.0;  // population std
    int at_round = -1;                         // requested checkpoint (-1 = none)
    double mean_at = 0.0, std_at = 0.0;
    int missing_at = 0;  // runs lacking the checkpoint round
};

// Per-technique mean +- std of the final accuracy and of the accuracy at
// `at_round` (when >= 0). Missing rounds are counted and warned about by the
// caller, never silently truncated.
std::vector<TechniqueSummary> summarize(const std::vector<RunResult>& results, int at_round);

std::string summary_to_json(const std::vector<TechniqueSummary>& rows);
std::string summary_to_text(const std::vector<TechniqueSummary>& rows);

}  // namespace distreal
