#include "q2t/dataset_io.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "q2t/error.hpp"

namespace q2t::symbolic {

using nlohmann::json;

std::string record_to_json(const QueryRecord& record) {
  json j;
  j["type"] = std::string(query::query_type_name(record.query.type));
  j["form"] = query::serialize_nested(record.query);
  j["easy_answers"] = record.easy_answers;
  j["hard_answers"] = record.hard_answers;
  return j.dump();
}

QueryRecord record_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, fmt::format("dataset record: {}", e.what()));
  }
  QueryRecord record;
  try {
    const auto type = query::parse_query_type(j.at("type").get<std::string>());
    record.query = query::parse_nested(j.at("form").get<std::string>());
    if (record.query.type != type) {
      throw Error(ErrorKind::kParse, fmt::format("record type '{}' does not match form '{}'",
                                                 j.at("type").get<std::string>(),
                                                 j.at("form").get<std::string>()));
    }
    record.easy_answers = j.at("easy_answers").get<AnswerSet>();
    record.hard_answers = j.at("hard_answers").get<AnswerSet>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, fmt::format("dataset record: {}", e.what()));
  }
  std::sort(record.easy_answers.begin(), record.easy_answers.end());
  std::sort(record.hard_answers.begin(), record.hard_answers.end());
  return record;
}

void write_jsonl(const SampledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write '{}'", path.string()));
  for (const auto& r : dataset.records) out << record_to_json(r) << '\n';
}

SampledDataset read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot open '{}'", path.string()));
  SampledDataset dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      dataset.records.push_back(record_from_json(line));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return dataset;
}

void write_splits(const DatasetSplits& splits, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_jsonl(splits.train, dir / "train.jsonl");
  write_jsonl(splits.valid, dir / "valid.jsonl");
  write_jsonl(splits.test, dir / "test.jsonl");
}

DatasetSplits read_splits(const std::filesystem::path& dir) {
  DatasetSplits splits;
  const auto read_if = [&](const char* name, SampledDataset& out) {
    if (std::filesystem::exists(dir / name)) out = read_jsonl(dir / name);
  };
  read_if("train.jsonl", splits.train);
  read_if("valid.jsonl", splits.valid);
  read_if("test.jsonl", splits.test);
  return splits;
}

std::string format_answer_stats(const SampledDataset& dataset) {
  const auto averages = average_answer_counts(dataset);
  std::string header = fmt::format("{:<10}", "Dataset");
  std::string row = fmt::format("{:<10}", "avg");
  for (auto type : query::kAllTemplates) {
    header += fmt::format("{:>7}", query::query_type_name(type));
    auto it = averages.find(type);
    row += it == averages.end() ? fmt::format("{:>7}", "-") : fmt::format("{:>7.1f}", it->second);
  }
  return header + "\n" + row + "\n";
}

}  // namespace q2t::symbolic
