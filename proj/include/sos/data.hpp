#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace sos {

// The five subitizing classes. FourPlus serializes as "4".
enum class CountLabel { Zero, One, Two, Three, FourPlus };

inline constexpr int kNumClasses = 5;

int label_index(CountLabel label);
CountLabel label_from_index(int index);
std::string label_to_string(CountLabel label);
CountLabel parse_count_label(const std::string& s);

// Category vocabulary for the real-image manifests.
const std::vector<std::string>& known_categories();
bool is_known_category(const std::string& c);

struct AnnotationRecord {
  std::string image_id;
  std::vector<CountLabel> votes;  // exactly 5
};

struct ManifestEntry {
  std::string image_path;
  CountLabel label = CountLabel::Zero;
  std::set<std::string> categories;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

struct SplitSpec {
  double train_fraction = 0.8;
  uint64_t seed = 0;
};

struct Consolidation {
  std::vector<std::pair<std::string, CountLabel>> kept;
  std::vector<std::string> excluded;
};

// Keeps an image iff one class receives at least 4 of its 5 votes; that
// class becomes the label. Throws SchemaError on a record without 5 votes.
Consolidation consolidate_annotations(const std::vector<AnnotationRecord>& records);

// A category survives iff it appears in at least 2 of the 3 voter sets.
std::set<std::string> majority_category(const std::vector<std::set<std::string>>& votes);

// Seeded uniform shuffle, then round(train_fraction * N) entries become the
// training half. Same spec -> bit-identical partition.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitSpec& spec);

// Held-out test = every image carrying the category, plus zero_test's
// entries when given (count-zero images kept aside from an earlier split).
// Train = the remaining manifest entries.
std::pair<DatasetManifest, DatasetManifest> leave_one_category_out(
    const DatasetManifest& manifest, const std::string& category,
    const DatasetManifest* zero_test = nullptr);

// annotations.csv: header image_id,v1,v2,v3,v4,v5; votes 0..4.
std::vector<AnnotationRecord> read_annotations_csv(const std::string& path);
void write_annotations_csv(const std::string& path,
                           const std::vector<AnnotationRecord>& records);

// manifest.csv: header image_path,label,categories; categories joined by ';'.
DatasetManifest read_manifest_csv(const std::string& path);
void write_manifest_csv(const std::string& path, const DatasetManifest& manifest);

// Writes train.csv, test.csv and a split.meta sidecar into out_dir.
void write_split(const std::string& out_dir, const DatasetManifest& train,
                 const DatasetManifest& test, const SplitSpec& spec);

}  // namespace sos
