#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgpat/memory.hpp"

namespace edgpat {

// Versioned binary archive: model tensors with optimizer moments, the
// memory state, and the entity ids everything is keyed by. Writes go to a
// temp file and rename into place, so readers never see a torn file.
struct Checkpoint {
  ModelParams params;
  MemoryState memory;
  long adam_step = 0;
  std::uint64_t config_hash = 0;
  std::vector<std::string> company_ids;
  std::vector<std::string> leaf_ids;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// Throws DataError when the checkpoint's entity ids do not match the
// dataset's (predictions would silently target the wrong rows otherwise).
void check_compatible(const Checkpoint& checkpoint, const std::vector<std::string>& company_ids,
                      const std::vector<std::string>& leaf_ids);

}  // namespace edgpat
