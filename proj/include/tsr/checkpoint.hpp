#ifndef TSR_CHECKPOINT_HPP
#define TSR_CHECKPOINT_HPP

#include <string>
#include <vector>

#include "tsr/trainer.hpp"

namespace tsr {

// Binary checkpoint, magic "TSRC". Little-endian, length-prefixed records,
// f64 parameter payloads, trailing FNV-1a checksum over everything before
// it. Version mismatches are rejected, never migrated; loading a truncated
// or corrupted file returns no partial state.
constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_digest = 0;
  std::string config_json;
  std::vector<std::pair<std::string, Tensor>> params;  // path-ordered
  std::vector<std::pair<std::string, AdamState>> optimizers;
  TrainState train_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Snapshot of a trained system plus optimizer states under group names
// task:<name> / shared.
Checkpoint snapshot_system(const TwoStageSystem& system, const TrainResult& result,
                           std::uint64_t config_digest, const std::string& config_json);

// Restores parameter values and optimizer states into a freshly built
// system; every checkpoint path must exist in the system and vice versa.
void restore_system(const Checkpoint& ckpt, TwoStageSystem* system, TrainResult* result);

}  // namespace tsr

#endif
