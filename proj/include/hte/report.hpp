#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hte/ddrct.hpp"
#include "hte/forest.hpp"
#include "hte/scores.hpp"

namespace hte {

struct HistogramSpec {
  int bins = 30;           // used when bin_width == 0
  double bin_width = 0.0;  // > 0 overrides bins

  void validate() const;
};

// Rows "bin_lo,bin_hi,count" followed by a footer block with the ATE point,
// its se, the 95% band, and the zero reference line; enough for any plotter.
std::string histogram_csv(const CateEstimates& cate, const AteEstimate& ate,
                          const HistogramSpec& spec);

// "contrast,estimate,se,n", one row per named contrast.
std::string ate_table_csv(const std::vector<std::pair<std::string, AteEstimate>>& rows);

// "node,depth,est,se,ci_lo,ci_hi,n,significant,rules"; undefined values are
// left empty, rules joined with " AND ".
std::string nodes_table_csv(const DdrctTree& tree);

// Graphviz rendering; significant nodes are starred.
std::string tree_dot(const DdrctTree& tree);

// Round-trippable serialization including selection diagnostics and the
// column names the rules refer to.
std::string tree_to_json(const DdrctTree& tree, std::span<const std::string> column_names,
                         const AteEstimate* ate = nullptr);
struct LoadedTree {
  DdrctTree tree;
  std::vector<std::string> column_names;
  bool has_ate = false;
  AteEstimate ate;
};
LoadedTree tree_from_json(const std::string& text);

}  // namespace hte
