#pragma once

#include "peanut/graph.hpp"
#include "peanut/models.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace peanut {

/// Exit codes: 0 success, 1 failure, 2 usage error.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct LoadedDataset {
  std::vector<Graph> graphs;
  /// The task the source implies, if any (generators know theirs).
  std::optional<Task> task;
  std::string source;
};

/// A graph JSON path, a manifest JSON carrying "source", or a generator spec:
///   sbm:n=400,blocks=2,p_in=0.05,p_out=0.005,signal=1,seed=0
///   regression:count=200,min=10,max=30,extra=0.1,dim=3,target=node-count,seed=0
///   classification:count=200,classes=2,min=10,max=30,extra=0.1,dim=3,seed=0
LoadedDataset load_dataset(const std::string& spec);

}  // namespace peanut
