#pragma once

#include <cstdint>
#include <string>

#include "cgan/gan.hpp"

namespace cgan::ckpt {

/// Model checkpoints are JSON documents: architecture, constraint polytope
/// (generator only), every trainable tensor, batch-norm running statistics
/// and the dropout stream states. Doubles round-trip exactly.
void save_generator(const gan::GeneratorModel& gen, const std::string& path);
void save_discriminator(const gan::DiscriminatorModel& disc, const std::string& path);

/// Rebuilds the model from a checkpoint written by the matching save call.
/// The solver configuration is not part of the file; the loaded generator
/// starts with default tolerances. Throws ParseError on malformed or
/// mismatched documents.
gan::GeneratorModel load_generator(const std::string& path);
gan::DiscriminatorModel load_discriminator(const std::string& path);

/// FNV-1a (64-bit) over the raw file bytes, as a 16-digit hex string.
std::string file_hash_hex(const std::string& path);

}  // namespace cgan::ckpt
