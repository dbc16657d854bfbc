#include "sos/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_set>

#include "sos/common.hpp"
#include "sos/csv.hpp"

namespace sos {

int label_index(CountLabel label) { return static_cast<int>(label); }

CountLabel label_from_index(int index) {
  if (index < 0 || index >= kNumClasses)
    throw SchemaError("count class index out of range: " + std::to_string(index));
  return static_cast<CountLabel>(index);
}

std::string label_to_string(CountLabel label) {
  return std::to_string(label_index(label));
}

CountLabel parse_count_label(const std::string& s) {
  if (s.size() == 1 && s[0] >= '0' && s[0] <= '4')
    return static_cast<CountLabel>(s[0] - '0');
  throw SchemaError("invalid count label: '" + s + "'");
}

const std::vector<std::string>& known_categories() {
  static const std::vector<std::string> cats = {"animal", "food", "people",
                                                "vehicle", "other"};
  return cats;
}

bool is_known_category(const std::string& c) {
  const auto& cats = known_categories();
  return std::find(cats.begin(), cats.end(), c) != cats.end();
}

Consolidation consolidate_annotations(const std::vector<AnnotationRecord>& records) {
  Consolidation out;
  for (const auto& rec : records) {
    if (rec.votes.size() != 5)
      throw SchemaError("annotation " + rec.image_id + " has " +
                        std::to_string(rec.votes.size()) + " votes, expected 5");
    int counts[kNumClasses] = {0};
    for (CountLabel v : rec.votes) ++counts[label_index(v)];
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
      if (counts[c] > counts[best]) best = c;
    if (counts[best] >= 4)
      out.kept.emplace_back(rec.image_id, label_from_index(best));
    else
      out.excluded.push_back(rec.image_id);
  }
  return out;
}

std::set<std::string> majority_category(const std::vector<std::set<std::string>>& votes) {
  if (votes.size() != 3)
    throw SchemaError("majority_category expects exactly 3 voter sets");
  std::set<std::string> all;
  for (const auto& v : votes) all.insert(v.begin(), v.end());
  std::set<std::string> out;
  for (const auto& c : all) {
    int n = 0;
    for (const auto& v : votes) n += v.count(c) ? 1 : 0;
    if (n >= 2) out.insert(c);
  }
  return out;
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitSpec& spec) {
  if (manifest.entries.empty())
    throw SchemaError("cannot split an empty manifest");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw SchemaError("train_fraction must lie in (0,1)");
  std::vector<ManifestEntry> shuffled = manifest.entries;
  Rng rng(spec.seed);
  for (size_t i = shuffled.size() - 1; i > 0; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)));
    std::swap(shuffled[i], shuffled[j]);
  }
  size_t n_train = static_cast<size_t>(
      std::llround(spec.train_fraction * static_cast<double>(shuffled.size())));
  n_train = std::min(n_train, shuffled.size());
  DatasetManifest train, test;
  train.entries.assign(shuffled.begin(), shuffled.begin() + n_train);
  test.entries.assign(shuffled.begin() + n_train, shuffled.end());
  return {std::move(train), std::move(test)};
}

std::pair<DatasetManifest, DatasetManifest> leave_one_category_out(
    const DatasetManifest& manifest, const std::string& category,
    const DatasetManifest* zero_test) {
  if (!is_known_category(category))
    throw SchemaError("unknown category: '" + category + "'");
  DatasetManifest train, test;
  std::unordered_set<std::string> held_out;
  for (const auto& e : manifest.entries)
    if (e.categories.count(category)) {
      test.entries.push_back(e);
      held_out.insert(e.image_path);
    }
  if (zero_test) {
    for (const auto& e : zero_test->entries)
      if (e.label == CountLabel::Zero && held_out.insert(e.image_path).second)
        test.entries.push_back(e);
  }
  for (const auto& e : manifest.entries)
    if (!held_out.count(e.image_path)) train.entries.push_back(e);
  return {std::move(train), std::move(test)};
}

std::vector<AnnotationRecord> read_annotations_csv(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty() || rows[0] != CsvRow{"image_id", "v1", "v2", "v3", "v4", "v5"})
    throw SchemaError(path + ": expected header image_id,v1,v2,v3,v4,v5");
  std::vector<AnnotationRecord> out;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 6)
      throw SchemaError(path + ": row " + std::to_string(i + 1) +
                        " has " + std::to_string(rows[i].size()) + " columns");
    AnnotationRecord rec;
    rec.image_id = rows[i][0];
    for (int v = 1; v <= 5; ++v) rec.votes.push_back(parse_count_label(rows[i][v]));
    out.push_back(std::move(rec));
  }
  return out;
}

void write_annotations_csv(const std::string& path,
                           const std::vector<AnnotationRecord>& records) {
  std::vector<CsvRow> rows;
  rows.push_back({"image_id", "v1", "v2", "v3", "v4", "v5"});
  for (const auto& rec : records) {
    if (rec.votes.size() != 5)
      throw SchemaError("annotation " + rec.image_id + " must have 5 votes");
    CsvRow row = {rec.image_id};
    for (CountLabel v : rec.votes) row.push_back(label_to_string(v));
    rows.push_back(std::move(row));
  }
  write_csv(path, rows);
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

DatasetManifest read_manifest_csv(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty() || rows[0] != CsvRow{"image_path", "label", "categories"})
    throw SchemaError(path + ": expected header image_path,label,categories");
  DatasetManifest out;
  std::unordered_set<std::string> seen;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3)
      throw SchemaError(path + ": row " + std::to_string(i + 1) +
                        " has " + std::to_string(rows[i].size()) + " columns");
    ManifestEntry e;
    e.image_path = rows[i][0];
    if (e.image_path.empty())
      throw SchemaError(path + ": row " + std::to_string(i + 1) + " has empty image_path");
    if (!seen.insert(e.image_path).second)
      throw SchemaError(path + ": duplicate image_path " + e.image_path);
    e.label = parse_count_label(rows[i][1]);
    if (!rows[i][2].empty()) {
      for (const auto& c : split_on(rows[i][2], ';')) {
        if (!is_known_category(c))
          throw SchemaError(path + ": unknown category '" + c + "'");
        e.categories.insert(c);
      }
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

void write_manifest_csv(const std::string& path, const DatasetManifest& manifest) {
  std::vector<CsvRow> rows;
  rows.push_back({"image_path", "label", "categories"});
  for (const auto& e : manifest.entries) {
    std::string cats;
    for (const auto& c : e.categories) {
      if (!cats.empty()) cats.push_back(';');
      cats += c;
    }
    rows.push_back({e.image_path, label_to_string(e.label), cats});
  }
  write_csv(path, rows);
}

void write_split(const std::string& out_dir, const DatasetManifest& train,
                 const DatasetManifest& test, const SplitSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_manifest_csv((fs::path(out_dir) / "train.csv").string(), train);
  write_manifest_csv((fs::path(out_dir) / "test.csv").string(), test);
  std::string meta;
  meta += "seed=" + std::to_string(spec.seed) + "\n";
  meta += "train_fraction=" + format_double(spec.train_fraction) + "\n";
  meta += "train_count=" + std::to_string(train.entries.size()) + "\n";
  meta += "test_count=" + std::to_string(test.entries.size()) + "\n";
  write_text_file((fs::path(out_dir) / "split.meta").string(), meta);
}

}  // namespace sos
