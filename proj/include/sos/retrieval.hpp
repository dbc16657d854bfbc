#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sos/eval.hpp"

namespace sos {

struct IndexItem {
  std::string id;
  std::vector<float> vec;
  std::vector<std::string> tags;
  std::array<float, kNumClasses> sos{};  // valid when the index carries scores
};

struct EmbeddingIndex {
  int dim = 0;
  bool has_sos = false;
  std::vector<IndexItem> items;
};

// Number half of a query; maps onto the four non-zero count classes.
enum class NumberGroup { One, Two, Three, Many };

NumberGroup parse_number_group(const std::string& s);
std::string group_to_string(NumberGroup g);
CountLabel group_to_label(NumberGroup g);

// Exact Euclidean k-NN around query (distance ties by item order); returns
// the fraction of those k neighbors carrying the tag.
double knn_tag_scores(const EmbeddingIndex& index, const std::vector<float>& query,
                      int k, const std::string& tag);

// Neighbor lists for every indexed item (each item's own vector as query),
// shared by the benchmark and the retrieval CLI.
std::vector<std::vector<int>> all_neighbors(const EmbeddingIndex& index, int k);
double tag_score_from_neighbors(const EmbeddingIndex& index,
                                const std::vector<int>& neighbors,
                                const std::string& tag);

double combine_text(double object_score, double number_tag_score);
double combine_sos(double object_score, const ScoreVector& sos_scores,
                   NumberGroup group);

// Binary-relevance nDCG with the fixed ideal of h relevant items. Lists
// shorter than h are padded with zeros (noted in warnings when given).
double ndcg_at_h(const std::vector<int>& relevances, int h,
                 std::vector<std::string>* warnings = nullptr);

enum class RetrievalMethod { Baseline, Text, Sos };
RetrievalMethod parse_retrieval_method(const std::string& s);

// (query string, item_id) -> 0/1
using Judgments = std::map<std::pair<std::string, std::string>, int>;

std::string query_string(NumberGroup group, const std::string& object_tag);

struct QueryResult {
  std::string object_tag;
  NumberGroup group = NumberGroup::One;
  std::vector<std::string> top_ids;
  double ndcg = 0.0;
};

struct RetrievalReport {
  std::vector<QueryResult> queries;
  std::array<double, 4> group_mean{};
  double overall_mean = 0.0;
  std::vector<std::string> warnings;
};

// Scores every indexed item for each (object tag, group) query: baseline uses
// the object-tag vote alone, text multiplies in the number-tag vote, sos
// multiplies in the stored subitizing score of the mapped class. Top items
// are judged against the judgments table.
RetrievalReport run_benchmark(const EmbeddingIndex& index,
                              const std::vector<std::string>& object_tags,
                              RetrievalMethod method, const Judgments& judgments,
                              int k = 75, int top = 20);

// Binary index file; see README for the exact layout.
EmbeddingIndex read_index(const std::string& path);
void write_index(const std::string& path, const EmbeddingIndex& index);

Judgments read_judgments_csv(const std::string& path);
void write_judgments_csv(const std::string& path, const Judgments& judgments);

void write_ndcg_csv(const std::string& path, const RetrievalReport& report);

}  // namespace sos
