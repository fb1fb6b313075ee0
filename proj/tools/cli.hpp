#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "io.hpp"
#include "robayes/huber.hpp"
#include "robayes/mallows.hpp"

namespace robayes::cli {

// Exit codes: 0 success, 1 numerical failure, 2 usage or input error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

// A rule together with what its worst-risk report needs.
struct LoadedRule {
  DecisionRule rule;
  json doc;                                     // self-contained rule JSON
  std::optional<HuberSolution> huber;           // closed-form Huber rules
  std::optional<DiscreteDistribution> contamination;  // Mallows rules
  double score_bound = std::nan("");            // sup |score| when known
};

// Accepts rule, mallows, huber and npmle documents.
LoadedRule rule_from_json(const json& doc, const std::string& where);
// File path, or mle | linear | bayes | huber:eps | mallows:eps relative to the prior.
LoadedRule load_rule(const std::string& arg, const PriorArg& prior);

json mallows_json(const MallowsSolution& s, const json& prior_echo, double atom_tol);
json huber_json(const HuberFit& h, const json& prior_echo, double eps, const Grid& table_grid);

// Figure plot data; names fig1..fig7.
void run_figure(const std::string& name, const std::string& out_dir, const std::vector<std::string>& argv);
const std::vector<std::string>& figure_names();

}  // namespace robayes::cli
