#include "sos/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "sos/common.hpp"
#include "sos/csv.hpp"

namespace sos {

NumberGroup parse_number_group(const std::string& s) {
  if (s == "one") return NumberGroup::One;
  if (s == "two") return NumberGroup::Two;
  if (s == "three") return NumberGroup::Three;
  if (s == "many") return NumberGroup::Many;
  throw SchemaError("unknown number group: '" + s + "'");
}

std::string group_to_string(NumberGroup g) {
  switch (g) {
    case NumberGroup::One: return "one";
    case NumberGroup::Two: return "two";
    case NumberGroup::Three: return "three";
    default: return "many";
  }
}

CountLabel group_to_label(NumberGroup g) {
  switch (g) {
    case NumberGroup::One: return CountLabel::One;
    case NumberGroup::Two: return CountLabel::Two;
    case NumberGroup::Three: return CountLabel::Three;
    default: return CountLabel::FourPlus;
  }
}

namespace {

std::vector<int> knn_order(const EmbeddingIndex& index,
                           const std::vector<float>& query, int k) {
  if (k < 1) throw SchemaError("k must be >= 1");
  if (size_t(k) > index.items.size())
    throw SchemaError("k exceeds the index size");
  if (int(query.size()) != index.dim)
    throw SchemaError("query dimension mismatch");
  std::vector<std::pair<double, int>> dist(index.items.size());
  for (size_t i = 0; i < index.items.size(); ++i) {
    double d = 0.0;
    const auto& v = index.items[i].vec;
    for (int j = 0; j < index.dim; ++j) {
      double diff = double(query[j]) - double(v[j]);
      d += diff * diff;
    }
    dist[i] = {d, int(i)};
  }
  std::stable_sort(dist.begin(), dist.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

bool has_tag(const IndexItem& item, const std::string& tag) {
  return std::find(item.tags.begin(), item.tags.end(), tag) != item.tags.end();
}

}  // namespace

double tag_score_from_neighbors(const EmbeddingIndex& index,
                                const std::vector<int>& neighbors,
                                const std::string& tag) {
  if (neighbors.empty()) throw SchemaError("empty neighbor list");
  int n = 0;
  for (int i : neighbors) n += has_tag(index.items[size_t(i)], tag) ? 1 : 0;
  return double(n) / double(neighbors.size());
}

double knn_tag_scores(const EmbeddingIndex& index, const std::vector<float>& query,
                      int k, const std::string& tag) {
  return tag_score_from_neighbors(index, knn_order(index, query, k), tag);
}

std::vector<std::vector<int>> all_neighbors(const EmbeddingIndex& index, int k) {
  std::vector<std::vector<int>> out(index.items.size());
  for (size_t i = 0; i < index.items.size(); ++i)
    out[i] = knn_order(index, index.items[i].vec, k);
  return out;
}

double combine_text(double object_score, double number_tag_score) {
  return object_score * number_tag_score;
}

double combine_sos(double object_score, const ScoreVector& sos_scores,
                   NumberGroup group) {
  return object_score * sos_scores[size_t(label_index(group_to_label(group)))];
}

double ndcg_at_h(const std::vector<int>& relevances, int h,
                 std::vector<std::string>* warnings) {
  if (h < 1) throw SchemaError("ndcg needs h >= 1");
  for (int r : relevances)
    if (r != 0 && r != 1) throw SchemaError("relevance must be 0 or 1");
  if (int(relevances.size()) < h && warnings)
    warnings->push_back("ranking shorter than h=" + std::to_string(h) +
                        "; padded with irrelevant items");
  double dcg = 0.0, ideal = 0.0;
  for (int i = 1; i <= h; ++i) {
    double gain = 1.0 / std::log2(double(i + 1));
    ideal += gain;
    if (i <= int(relevances.size()) && relevances[size_t(i - 1)] == 1)
      dcg += gain;
  }
  return dcg / ideal;
}

RetrievalMethod parse_retrieval_method(const std::string& s) {
  if (s == "baseline") return RetrievalMethod::Baseline;
  if (s == "text") return RetrievalMethod::Text;
  if (s == "sos") return RetrievalMethod::Sos;
  throw SchemaError("unknown retrieval method: '" + s + "'");
}

std::string query_string(NumberGroup group, const std::string& object_tag) {
  return group_to_string(group) + " " + object_tag;
}

RetrievalReport run_benchmark(const EmbeddingIndex& index,
                              const std::vector<std::string>& object_tags,
                              RetrievalMethod method, const Judgments& judgments,
                              int k, int top) {
  if (object_tags.empty()) throw SchemaError("no object tags to benchmark");
  if (method == RetrievalMethod::Sos && !index.has_sos)
    throw SchemaError("index carries no subitizing scores");
  RetrievalReport report;
  auto neighbors = all_neighbors(index, k);
  const NumberGroup groups[4] = {NumberGroup::One, NumberGroup::Two,
                                 NumberGroup::Three, NumberGroup::Many};
  std::array<double, 4> group_sum{};
  for (const auto& tag : object_tags) {
    std::vector<double> object_score(index.items.size());
    for (size_t i = 0; i < index.items.size(); ++i)
      object_score[i] = tag_score_from_neighbors(index, neighbors[i], tag);
    for (int gi = 0; gi < 4; ++gi) {
      NumberGroup g = groups[gi];
      std::vector<double> score(index.items.size());
      switch (method) {
        case RetrievalMethod::Baseline:
          score = object_score;
          break;
        case RetrievalMethod::Text: {
          std::string number_tag = group_to_string(g);
          for (size_t i = 0; i < index.items.size(); ++i)
            score[i] = combine_text(
                object_score[i],
                tag_score_from_neighbors(index, neighbors[i], number_tag));
          break;
        }
        case RetrievalMethod::Sos:
          for (size_t i = 0; i < index.items.size(); ++i) {
            ScoreVector sv;
            for (int c = 0; c < kNumClasses; ++c)
              sv[size_t(c)] = index.items[i].sos[size_t(c)];
            score[i] = combine_sos(object_score[i], sv, g);
          }
          break;
      }
      std::vector<int> order(index.items.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return score[size_t(a)] > score[size_t(b)]; });
      QueryResult q;
      q.object_tag = tag;
      q.group = g;
      std::string key = query_string(g, tag);
      std::vector<int> rels;
      size_t n_top = std::min<size_t>(size_t(top), order.size());
      bool missing = false;
      for (size_t i = 0; i < n_top; ++i) {
        const std::string& id = index.items[size_t(order[i])].id;
        q.top_ids.push_back(id);
        auto it = judgments.find({key, id});
        if (it == judgments.end()) {
          missing = true;
          rels.push_back(0);
        } else {
          rels.push_back(it->second);
        }
      }
      if (missing)
        report.warnings.push_back("query '" + key +
                                  "': unjudged items treated as irrelevant");
      q.ndcg = ndcg_at_h(rels, top, &report.warnings);
      group_sum[size_t(gi)] += q.ndcg;
      report.queries.push_back(std::move(q));
    }
  }
  double total = 0.0;
  for (int gi = 0; gi < 4; ++gi) {
    report.group_mean[size_t(gi)] = group_sum[size_t(gi)] / double(object_tags.size());
    total += group_sum[size_t(gi)];
  }
  report.overall_mean = total / double(report.queries.size());
  return report;
}

namespace {

constexpr char kIndexMagic[4] = {'S', 'O', 'S', 'I'};
constexpr uint32_t kIndexVersion = 2;
constexpr uint32_t kFlagSosScores = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw FormatError("truncated index file: " + path);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= uint32_t(uint8_t(buf[pos + size_t(i)])) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    if (n > (1u << 20)) throw FormatError("oversized string in index: " + path);
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

EmbeddingIndex read_index(const std::string& path) {
  std::string buf = read_text_file(path);
  Reader r{buf, 0, path};
  r.need(4);
  if (std::memcmp(buf.data(), kIndexMagic, 4) != 0)
    throw FormatError("not an index file: " + path);
  r.pos = 4;
  uint32_t version = r.u32();
  if (version != kIndexVersion)
    throw FormatError("unsupported index version in " + path);
  uint32_t count = r.u32();
  uint32_t dim = r.u32();
  uint32_t flags = r.u32();
  if (dim == 0) throw FormatError("zero-dimension index: " + path);
  EmbeddingIndex index;
  index.dim = int(dim);
  index.has_sos = (flags & kFlagSosScores) != 0;
  index.items.resize(count);
  for (auto& item : index.items) {
    item.id = r.str();
    item.vec.resize(dim);
    for (auto& v : item.vec) {
      v = r.f32();
      if (!std::isfinite(v))
        throw FormatError("non-finite embedding entry in " + path);
    }
    uint32_t n_tags = r.u32();
    if (n_tags > (1u << 16)) throw FormatError("oversized tag list in " + path);
    item.tags.resize(n_tags);
    for (auto& t : item.tags) t = r.str();
    if (index.has_sos)
      for (auto& s : item.sos) s = r.f32();
  }
  if (r.pos != buf.size())
    throw FormatError("trailing bytes in index file: " + path);
  return index;
}

void write_index(const std::string& path, const EmbeddingIndex& index) {
  for (const auto& item : index.items)
    if (int(item.vec.size()) != index.dim)
      throw SchemaError("embedding dimension mismatch for " + item.id);
  std::string out;
  out.append(kIndexMagic, 4);
  put_u32(out, kIndexVersion);
  put_u32(out, uint32_t(index.items.size()));
  put_u32(out, uint32_t(index.dim));
  put_u32(out, index.has_sos ? kFlagSosScores : 0);
  for (const auto& item : index.items) {
    put_u32(out, uint32_t(item.id.size()));
    out += item.id;
    for (float v : item.vec) put_f32(out, v);
    put_u32(out, uint32_t(item.tags.size()));
    for (const auto& t : item.tags) {
      put_u32(out, uint32_t(t.size()));
      out += t;
    }
    if (index.has_sos)
      for (float s : item.sos) put_f32(out, s);
  }
  write_text_file(path, out);
}

Judgments read_judgments_csv(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty() || rows[0] != CsvRow{"query", "item_id", "rel"})
    throw SchemaError(path + ": expected header query,item_id,rel");
  Judgments out;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3)
      throw SchemaError(path + ": row " + std::to_string(i + 1) + " needs 3 columns");
    const std::string& rel = rows[i][2];
    if (rel != "0" && rel != "1")
      throw SchemaError(path + ": relevance must be 0 or 1, got '" + rel + "'");
    out[{rows[i][0], rows[i][1]}] = rel == "1" ? 1 : 0;
  }
  return out;
}

void write_judgments_csv(const std::string& path, const Judgments& judgments) {
  std::vector<CsvRow> rows;
  rows.push_back({"query", "item_id", "rel"});
  for (const auto& [key, rel] : judgments)
    rows.push_back({key.first, key.second, std::to_string(rel)});
  write_csv(path, rows);
}

void write_ndcg_csv(const std::string& path, const RetrievalReport& report) {
  std::vector<CsvRow> rows;
  rows.push_back({"object_tag", "group", "ndcg"});
  for (const auto& q : report.queries)
    rows.push_back({q.object_tag, group_to_string(q.group), format_double(q.ndcg)});
  const char* names[4] = {"one", "two", "three", "many"};
  for (int gi = 0; gi < 4; ++gi)
    rows.push_back({"mean", names[gi], format_double(report.group_mean[size_t(gi)])});
  rows.push_back({"mean", "all", format_double(report.overall_mean)});
  write_csv(path, rows);
}

}  // namespace sos
