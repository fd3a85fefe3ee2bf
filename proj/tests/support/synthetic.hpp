#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sluxfer/corpus.hpp"

namespace sluxfer::testing {

// Template-generated utterances for two small domains sharing part of
// their vocabulary: "travel" (flights, weather) and "media" (music,
// movies, restaurants). Deterministic in the seed.
enum class Domain { kTravel, kMedia };

std::vector<Utterance> generate_utterances(Domain domain, std::size_t count, std::uint64_t seed);

// Train/dev/test splits with a label space covering all three.
Dataset make_dataset(Domain domain, std::size_t train, std::size_t dev, std::size_t test, std::uint64_t seed);

// Writes train/dev/test.tsv under `dir`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace sluxfer::testing
