#pragma once

// Scripted stand-ins for a human editor, used for headless experiments.

#include "spacedit/feedback.hpp"
#include "spacedit/session.hpp"

#include <cstdint>
#include <string_view>

namespace spacedit {

enum class OraclePolicy {
  to_true_centroid,        // mispredicted items jump to their true class centroid
  separate_mixed,          // push the most-confused class pair apart
  aggregate_within_class,  // pull scattered items halfway to their centroid
};

std::string_view to_string(OraclePolicy policy);
OraclePolicy oracle_policy_from_string(std::string_view name);

struct OracleOptions {
  std::uint64_t seed = 0;
  double jitter = 0.05;  // fraction of the class guide radius
};

/// Only train/validation items are ever moved. The transaction may be empty.
EditTransaction oracle_edit(const Session& session, OraclePolicy policy,
                            const OracleOptions& options = {});

}  // namespace spacedit
