#pragma once

#include <string>
#include <vector>

#include "hopular/model.hpp"

namespace hopular {

// Everything needed to evaluate a trained model later: hyperparameters,
// parameter tensors, the training-split normalization statistics and token
// maps, the split assignment, and fingerprints tying the checkpoint to its
// schema and data files. Serialized as versioned JSON; doubles round-trip
// exactly.
struct CheckpointBundle {
    HopularModel model;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::vector<std::string>> category_tokens;
    std::vector<int> split_of_row;
    std::string schema_fingerprint;
    std::string data_fingerprint;
    std::string run_config_json;  // opaque copy of the run configuration
};

void save_checkpoint(const std::string& path, const CheckpointBundle& bundle);
CheckpointBundle load_checkpoint(const std::string& path);

// Transfers stored split/statistics onto a freshly loaded dataset after
// verifying the data fingerprint.
void apply_checkpoint_dataset_state(const CheckpointBundle& bundle, Dataset& ds,
                                    const std::string& data_fingerprint);

}  // namespace hopular
