#pragma once

#include <string>
#include <vector>

#include "distreal/dse.hpp"
#include "distreal/experiment.hpp"

namespace distreal {

// Accuracy-vs-round plot, one mean line plus mean +- std band per technique.
void write_convergence_svg(const std::vector<RunResult>& results, const std::string& path);

// Expected-MACs vs delta-accuracy scatter of the front with the measured
// uniform-rate reference curve.
void write_pareto_svg(const std::vector<Individual>& front,
                      const std::vector<Individual>& uniform_curve, const std::string& path);

}  // namespace distreal
