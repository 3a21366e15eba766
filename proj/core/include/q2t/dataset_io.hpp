#pragma once

#include <filesystem>
#include <string>

#include "q2t/symbolic_engine.hpp"

namespace q2t::symbolic {

// JSON lines, one record per query:
//   {"type": "2in", "form": "((1,(5,)),(2,(6,n)))", "easy_answers": [...], "hard_answers": [...]}
std::string record_to_json(const QueryRecord& record);
QueryRecord record_from_json(std::string_view line);

void write_jsonl(const SampledDataset& dataset, const std::filesystem::path& path);
SampledDataset read_jsonl(const std::filesystem::path& path);

// Writes train.jsonl, valid.jsonl and test.jsonl.
void write_splits(const DatasetSplits& splits, const std::filesystem::path& dir);
DatasetSplits read_splits(const std::filesystem::path& dir);

// One header row of type names and one row of average answer counts.
std::string format_answer_stats(const SampledDataset& dataset);

}  // namespace q2t::symbolic
