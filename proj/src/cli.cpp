#include "sos/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>

#include "sos/codec.hpp"
#include "sos/common.hpp"
#include "sos/config.hpp"
#include "sos/csv.hpp"
#include "sos/data.hpp"
#include "sos/detect.hpp"
#include "sos/eval.hpp"
#include "sos/featviz.hpp"
#include "sos/retrieval.hpp"
#include "sos/synth.hpp"
#include "sos/train.hpp"

namespace fs = std::filesystem;

namespace sos {
namespace {

// --out accepts either a directory or a file path; a path with the expected
// extension names the artifact directly, otherwise default_name lands inside.
struct OutSpec {
  std::string dir;
  std::string file;
};

OutSpec resolve_out(const std::string& out, const std::string& default_name) {
  fs::path p = out.empty() ? fs::path(".") : fs::path(out);
  if (p.has_extension()) {
    OutSpec spec;
    spec.dir = p.parent_path().empty() ? "." : p.parent_path().string();
    spec.file = p.string();
    return spec;
  }
  return {p.string(), (p / default_name).string()};
}

std::string manifest_base_dir(const std::string& manifest_path) {
  return fs::path(manifest_path).parent_path().string();
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

// Labels' number-group word for item tagging; Zero has no group.
std::string group_tag_for_label(CountLabel label) {
  switch (label) {
    case CountLabel::One: return "one";
    case CountLabel::Two: return "two";
    case CountLabel::Three: return "three";
    case CountLabel::FourPlus: return "many";
    default: return "";
  }
}

struct CliState {
  PipelineConfig cfg;
  std::string out = ".";
};

void cmd_consolidate(const CliState& st, const std::string& annotations) {
  auto records = read_annotations_csv(annotations);
  auto result = consolidate_annotations(records);

  DatasetManifest kept;
  for (const auto& [id, label] : result.kept) {
    ManifestEntry e;
    e.image_path = id;
    e.label = label;
    kept.entries.push_back(e);
  }
  OutSpec out = resolve_out(st.out, "consolidated.csv");
  fs::create_directories(out.dir);
  write_manifest_csv(out.file, kept);

  std::vector<CsvRow> excluded{{"image_id"}};
  for (const auto& id : result.excluded) excluded.push_back({id});
  write_csv((fs::path(out.dir) / "excluded.csv").string(), excluded);
  write_resolved_config(out.dir, st.cfg);
  std::printf("kept=%zu excluded=%zu\n", result.kept.size(), result.excluded.size());
}

void cmd_split(const CliState& st, const std::string& data, double fraction,
               const std::string& category, const std::string& zero_test) {
  auto manifest = read_manifest_csv(data);
  SplitSpec spec;
  spec.train_fraction = fraction;
  spec.seed = st.cfg.seed;

  std::pair<DatasetManifest, DatasetManifest> parts;
  if (!category.empty()) {
    DatasetManifest zeros;
    if (!zero_test.empty()) zeros = read_manifest_csv(zero_test);
    parts = leave_one_category_out(manifest, category,
                                   zero_test.empty() ? nullptr : &zeros);
  } else {
    parts = split_dataset(manifest, spec);
  }
  OutSpec out = resolve_out(st.out, "train.csv");
  fs::create_directories(out.dir);
  // manifest paths resolve against the manifest's own directory, so entries
  // moving into out.dir need their relative paths rebased
  const fs::path src_base = fs::absolute(fs::path(data)).parent_path();
  const fs::path out_abs = fs::absolute(out.dir);
  auto rebase = [&](DatasetManifest& m) {
    for (auto& e : m.entries)
      e.image_path = (src_base / e.image_path)
                         .lexically_proximate(out_abs)
                         .generic_string();
  };
  rebase(parts.first);
  rebase(parts.second);
  write_split(out.dir, parts.first, parts.second, spec);
  write_resolved_config(out.dir, st.cfg);
  std::printf("train=%zu test=%zu\n", parts.first.entries.size(),
              parts.second.entries.size());
}

void cmd_synth(const CliState& st, const std::string& lib_path, int per_class,
               bool no_backgrounds, double threshold) {
  auto lib = filter_library(read_library_csv(lib_path), threshold);
  print_warnings(lib.warnings);
  OutSpec out = resolve_out(st.out, "manifest.csv");
  auto result = generate_corpus(lib, st.cfg.synth, per_class, st.cfg.seed,
                                !no_backgrounds, out.dir);
  write_resolved_config(out.dir, st.cfg);
  for (const auto& s : result.shortfalls)
    std::fprintf(stderr, "warning: shortfall %s\n", s.c_str());
  std::printf("accepted=%d rejected=%d shortfalls=%zu\n", result.accepted,
              result.rejected, result.shortfalls.size());
}

void cmd_train(const CliState& st, const std::string& data, int iters,
               const std::string& init_path, bool freeze, int side) {
  auto manifest = read_manifest_csv(data);
  std::vector<std::string> warnings;
  auto prepared = prepare_dataset(manifest, side, manifest_base_dir(data), &warnings);
  print_warnings(warnings);

  SubitNetSpec spec;
  spec.input_side = side;
  TrainConfig tc = st.cfg.train;
  tc.total_iters = iters;
  tc.freeze_features = freeze;

  ModelState init;
  const ModelState* init_ptr = nullptr;
  if (!init_path.empty()) {
    init = load_model(init_path);
    spec = init.spec;
    init_ptr = &init;
  }
  auto result = train(prepared, spec, tc, init_ptr);

  OutSpec out = resolve_out(st.out, "model.subt");
  fs::create_directories(out.dir);
  save_model(out.file, result.state);
  write_loss_curve_csv((fs::path(out.dir) / "loss_curve.csv").string(), result.curve);
  write_resolved_config(out.dir, st.cfg);
  const double final_loss = result.curve.empty() ? 0.0 : result.curve.back().loss;
  std::printf("model=%s iterations=%lld final_loss=%s\n", out.file.c_str(),
              static_cast<long long>(result.state.iteration),
              format_double(final_loss).c_str());
}

void cmd_two_stage(const CliState& st, const std::string& synth_csv,
                   const std::string& real_csv, int iters1, int iters2,
                   bool freeze, int side) {
  std::vector<std::string> warnings;
  auto synthetic = prepare_dataset(read_manifest_csv(synth_csv), side,
                                   manifest_base_dir(synth_csv), &warnings);
  auto real = prepare_dataset(read_manifest_csv(real_csv), side,
                              manifest_base_dir(real_csv), &warnings);
  print_warnings(warnings);

  SubitNetSpec spec;
  spec.input_side = side;
  TrainConfig stage1 = st.cfg.train;
  stage1.total_iters = iters1;
  TrainConfig stage2 = st.cfg.train;
  stage2.total_iters = iters2;
  stage2.freeze_features = freeze;
  stage2.seed = mix_seed(st.cfg.seed, 1);  // fresh batch stream for stage 2

  auto result = two_stage_finetune(synthetic, real, spec, stage1, stage2);

  OutSpec out = resolve_out(st.out, "model.subt");
  fs::create_directories(out.dir);
  save_model(out.file, result.state);
  write_loss_curve_csv((fs::path(out.dir) / "loss_stage1.csv").string(),
                       result.stage1_curve);
  write_loss_curve_csv((fs::path(out.dir) / "loss_stage2.csv").string(),
                       result.stage2_curve);
  write_resolved_config(out.dir, st.cfg);
  std::printf("model=%s stage1=%d stage2=%d\n", out.file.c_str(), iters1, iters2);
}

void cmd_evaluate(const CliState& st, const std::string& model_path,
                  const std::string& data) {
  auto state = load_model(model_path);
  auto manifest = read_manifest_csv(data);
  if (manifest.entries.empty()) throw SchemaError("empty test manifest");
  const std::string base = manifest_base_dir(data);

  std::vector<ScoreVector> scores;
  std::vector<CountLabel> labels;
  int64_t correct = 0;
  for (const auto& e : manifest.entries) {
    const std::string path =
        base.empty() ? e.image_path : (fs::path(base) / e.image_path).string();
    auto fwd = run_image(state, load_image(path));
    scores.push_back(fwd.probs);
    labels.push_back(e.label);
    const int pred = int(std::max_element(fwd.probs.begin(), fwd.probs.end()) -
                         fwd.probs.begin());
    if (pred == label_index(e.label)) ++correct;
  }
  auto ap = map_per_class(scores, labels);
  print_warnings(ap.warnings);
  auto cm = confusion(scores, labels);

  OutSpec out = resolve_out(st.out, "report.csv");
  fs::create_directories(out.dir);
  write_eval_report(out.file, ap, cm);
  write_resolved_config(out.dir, st.cfg);
  std::printf("map=%s accuracy=%s n=%zu\n", format_double(ap.mean).c_str(),
              format_double(double(correct) / double(labels.size())).c_str(),
              labels.size());
}

void cmd_featviz(const CliState& st, const std::string& model_path,
                 const std::string& reference_path, const std::string& data,
                 double threshold) {
  auto model = load_model(model_path);
  auto reference = load_model(reference_path);
  auto manifest = read_manifest_csv(data);
  if (manifest.entries.empty()) throw SchemaError("empty probe manifest");
  const std::string base = manifest_base_dir(data);

  const int n = int(manifest.entries.size());
  const int model_ch = model.spec.channels[2];
  const int ref_ch = reference.spec.channels[2];
  std::vector<ChannelRanking> model_rank(size_t(model_ch), ChannelRanking{});
  std::vector<ChannelRanking> ref_rank(size_t(ref_ch), ChannelRanking{});
  for (int c = 0; c < model_ch; ++c) model_rank[size_t(c)].channel_id = c;
  for (int c = 0; c < ref_ch; ++c) ref_rank[size_t(c)].channel_id = c;

  // per-channel spatial activation maps of the probed model, kept for patches
  std::vector<std::vector<ActivationMap>> maps(size_t(model_ch),
                                               std::vector<ActivationMap>{});
  std::vector<RasterImage> probes;
  for (const auto& e : manifest.entries) {
    const std::string path =
        base.empty() ? e.image_path : (fs::path(base) / e.image_path).string();
    probes.push_back(load_image(path));
    auto fwd = run_image(model, probes.back());
    auto ref_fwd = run_image(reference, probes.back());
    const int mh = fwd.feature_maps.dim(1), mw = fwd.feature_maps.dim(2);
    for (int c = 0; c < model_ch; ++c) {
      ActivationMap m;
      m.h = mh;
      m.w = mw;
      m.v.assign(fwd.feature_maps.data.begin() + size_t(c) * mh * mw,
                 fwd.feature_maps.data.begin() + size_t(c + 1) * mh * mw);
      maps[size_t(c)].push_back(m);
      model_rank[size_t(c)].activation.push_back(
          *std::max_element(m.v.begin(), m.v.end()));
    }
    const int rh = ref_fwd.feature_maps.dim(1), rw = ref_fwd.feature_maps.dim(2);
    for (int c = 0; c < ref_ch; ++c) {
      auto begin = ref_fwd.feature_maps.data.begin() + size_t(c) * rh * rw;
      ref_rank[size_t(c)].activation.push_back(
          *std::max_element(begin, begin + size_t(rh) * rw));
    }
  }

  std::vector<std::string> warnings;
  auto scores = novelty_scores(model_rank, ref_rank, &warnings);
  auto novel = select_novel(scores, threshold);
  auto hist = novelty_histogram(scores);

  OutSpec out = resolve_out(st.out, "novelty.csv");
  fs::create_directories(out.dir);
  write_novelty_csv(out.file, scores);
  write_histogram_csv((fs::path(out.dir) / "histogram.csv").string(), hist);

  for (const auto& ns : novel) {
    std::vector<PatchSpec> patches;
    // probe images may differ in size, so patches are picked per image shape
    auto& channel_maps = maps[size_t(ns.channel_id)];
    std::vector<RasterImage> tiles;
    patches = top_patches(channel_maps, probes[0].width, probes[0].height, 9,
                          0.6, &warnings);
    for (const auto& p : patches) {
      auto tile = crop(probes[size_t(p.source)], int(std::lround(p.box.x)),
                       int(std::lround(p.box.y)), int(std::lround(p.box.w)),
                       int(std::lround(p.box.h)));
      tiles.push_back(resize_bilinear(tile, 96, 96));
    }
    auto sheet = montage_3x3(tiles);
    save_image(sheet, (fs::path(out.dir) /
                       ("montage_ch" + std::to_string(ns.channel_id) + ".png"))
                          .string());
  }
  write_resolved_config(out.dir, st.cfg);
  print_warnings(warnings);
  std::printf("channels=%zu novel=%zu montages=%zu\n", scores.size(),
              novel.size(), novel.size());
}

void cmd_cue(const CliState& st, const std::string& detections,
             const std::string& counts_path) {
  auto images = read_detections_jsonl(detections);
  auto counts = read_counts_csv(counts_path);

  std::vector<ImageDetections> selected;
  for (const auto& img : images) {
    int64_t n = -1;
    for (const auto& [id, c] : counts)
      if (id == img.image_id) n = c;
    if (n < 0) throw SchemaError("no count for image " + img.image_id);
    ImageDetections keep = img;
    keep.candidates = cue_by_count(img.candidates, n);
    selected.push_back(std::move(keep));
  }
  OutSpec out = resolve_out(st.out, "selected.jsonl");
  fs::create_directories(out.dir);
  write_detections_jsonl(out.file, selected);
  write_resolved_config(out.dir, st.cfg);
  auto prf = match_and_score(selected, st.cfg.iou_threshold);
  std::printf("precision=%s recall=%s f=%s\n",
              format_double(prf.precision).c_str(),
              format_double(prf.recall).c_str(),
              format_double(prf.f_measure).c_str());
}

void cmd_detscore(const CliState& st, const std::string& detections) {
  auto images = read_detections_jsonl(detections);
  std::set<double> unique_scores;
  for (const auto& img : images)
    for (const auto& w : img.candidates) unique_scores.insert(w.score);
  if (unique_scores.empty()) throw SchemaError("no candidate windows to score");
  std::vector<double> thresholds(unique_scores.begin(), unique_scores.end());

  auto curve = sweep_threshold(images, thresholds, st.cfg.iou_threshold);
  OutSpec out = resolve_out(st.out, "pr.csv");
  fs::create_directories(out.dir);
  write_pr_csv(out.file, curve);
  write_resolved_config(out.dir, st.cfg);
  std::printf("best_threshold=%s best_f=%s points=%zu\n",
              format_double(curve.best_threshold).c_str(),
              format_double(curve.best_f).c_str(), curve.points.size());
}

// "two animals" -> (NumberGroup::Two, "animals")
std::pair<NumberGroup, std::string> parse_query(const std::string& query) {
  const size_t space = query.find(' ');
  if (space == std::string::npos || space + 1 >= query.size())
    throw SchemaError("query must be '<number-word> <tag>': " + query);
  NumberGroup group = parse_number_group(query.substr(0, space));
  return {group, query.substr(space + 1)};
}

int clamp_k(int k, size_t index_size) {
  if (k <= int(index_size)) return k;
  std::fprintf(stderr,
               "warning: k=%d exceeds the index size %zu; using every item\n",
               k, index_size);
  return int(index_size);
}

void cmd_retrieve(const CliState& st, const std::string& index_path,
                  const std::string& query, const std::string& method_str,
                  int top, const std::string& model_path, int k) {
  auto index = read_index(index_path);
  RetrievalMethod method = parse_retrieval_method(method_str);
  if (method == RetrievalMethod::Sos && !index.has_sos)
    throw SchemaError(
        "index carries no subitizing scores; rebuild it with `sos index "
        "--model ...`");
  if (!model_path.empty())
    std::fprintf(stderr,
                 "warning: --model is unused here; subitizing scores are "
                 "precomputed when the index is built\n");
  auto [group, tag] = parse_query(query);

  auto neighbors = all_neighbors(index, clamp_k(k, index.items.size()));
  const std::string number_word = group_to_string(group);
  std::vector<std::pair<double, int>> ranked;
  for (int i = 0; i < int(index.items.size()); ++i) {
    const double object = tag_score_from_neighbors(index, neighbors[size_t(i)], tag);
    double s = object;
    if (method == RetrievalMethod::Text) {
      const double number =
          tag_score_from_neighbors(index, neighbors[size_t(i)], number_word);
      s = combine_text(object, number);
    } else if (method == RetrievalMethod::Sos) {
      ScoreVector sos_scores{};
      for (int c = 0; c < kNumClasses; ++c)
        sos_scores[size_t(c)] = index.items[size_t(i)].sos[size_t(c)];
      s = combine_sos(object, sos_scores, group);
    }
    ranked.push_back({s, i});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  OutSpec out = resolve_out(st.out, "results.csv");
  fs::create_directories(out.dir);
  std::vector<CsvRow> rows{{"rank", "item_id", "score"}};
  const int shown = std::min<int>(top, int(ranked.size()));
  for (int r = 0; r < shown; ++r) {
    const auto& item = index.items[size_t(ranked[size_t(r)].second)];
    rows.push_back({std::to_string(r + 1), item.id,
                    format_double(ranked[size_t(r)].first)});
    std::printf("%d,%s,%s\n", r + 1, item.id.c_str(),
                format_double(ranked[size_t(r)].first).c_str());
  }
  write_csv(out.file, rows);
  write_resolved_config(out.dir, st.cfg);
}

void cmd_retbench(const CliState& st, const std::string& index_path,
                  const std::string& judgments_path,
                  const std::string& method_str, int top, int k) {
  auto index = read_index(index_path);
  auto judgments = read_judgments_csv(judgments_path);
  RetrievalMethod method = parse_retrieval_method(method_str);
  if (method == RetrievalMethod::Sos && !index.has_sos)
    throw SchemaError(
        "index carries no subitizing scores; rebuild it with `sos index "
        "--model ...`");

  std::set<std::string> tag_set;
  for (const auto& [key, rel] : judgments)
    tag_set.insert(parse_query(key.first).second);
  std::vector<std::string> tags(tag_set.begin(), tag_set.end());
  if (tags.empty()) throw SchemaError("judgments name no object tags");

  auto report = run_benchmark(index, tags, method, judgments,
                              clamp_k(k, index.items.size()), top);
  print_warnings(report.warnings);

  OutSpec out = resolve_out(st.out, "ndcg.csv");
  fs::create_directories(out.dir);
  write_ndcg_csv(out.file, report);
  write_resolved_config(out.dir, st.cfg);
  std::printf("method=%s queries=%zu mean_ndcg=%s\n", method_str.c_str(),
              report.queries.size(), format_double(report.overall_mean).c_str());
}

void cmd_gradcheck(const CliState& st, double tolerance, bool sabotage) {
  auto report = gradient_check(st.cfg.seed, tolerance, 64, sabotage);
  std::printf("max_rel_error=%s worst=%s checked=%d %s\n",
              format_double(report.max_rel_error).c_str(),
              report.worst_param.c_str(), report.checked,
              report.pass ? "pass" : "fail");
  if (!report.pass) throw std::runtime_error("gradient check failed");
}

void cmd_index(const CliState& st, const std::string& data,
               const std::string& model_path, bool no_sos) {
  auto manifest = read_manifest_csv(data);
  if (manifest.entries.empty()) throw SchemaError("empty manifest");
  auto state = load_model(model_path);
  const std::string base = manifest_base_dir(data);

  EmbeddingIndex index;
  index.has_sos = !no_sos;
  for (const auto& e : manifest.entries) {
    const std::string path =
        base.empty() ? e.image_path : (fs::path(base) / e.image_path).string();
    auto fwd = run_image(state, load_image(path));
    IndexItem item;
    item.id = e.image_path;
    item.vec = fwd.embedding;
    for (const auto& c : e.categories) item.tags.push_back(c);
    const std::string number_word = group_tag_for_label(e.label);
    if (!number_word.empty()) item.tags.push_back(number_word);
    if (index.has_sos)
      for (int c = 0; c < kNumClasses; ++c)
        item.sos[size_t(c)] = float(fwd.probs[size_t(c)]);
    index.items.push_back(std::move(item));
  }
  index.dim = int(index.items[0].vec.size());

  OutSpec out = resolve_out(st.out, "index.sosi");
  fs::create_directories(out.dir);
  write_index(out.file, index);
  write_resolved_config(out.dir, st.cfg);
  std::printf("indexed=%zu dim=%d sos=%s\n", index.items.size(), index.dim,
              index.has_sos ? "yes" : "no");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"salient-object subitizing toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CliState st;
  std::string config_path;
  uint64_t seed_flag = 0;
  auto* config_opt = app.add_option("--config", config_path, "key=value config file");
  auto* seed_opt = app.add_option("--seed", seed_flag, "global random seed");
  app.add_option("--out", st.out, "output directory (or artifact path)");

  struct {
    std::string annotations;
  } consolidate;
  auto* c_consolidate = app.add_subcommand("consolidate", "resolve count-label votes");
  c_consolidate->add_option("--annotations", consolidate.annotations)->required();

  struct {
    std::string data, category, zero_test;
    double fraction = 0.8;
  } split;
  auto* c_split = app.add_subcommand("split", "partition a manifest");
  c_split->add_option("--data", split.data)->required();
  c_split->add_option("--fraction", split.fraction);
  c_split->add_option("--category", split.category,
                      "hold out one category instead of a random split");
  c_split->add_option("--zero-test", split.zero_test,
                      "zero-count test manifest merged into the held-out side");

  struct {
    std::string lib;
    int per_class = -1;
    bool no_backgrounds = false;
    double threshold = -1.0;
  } synth;
  auto* c_synth = app.add_subcommand("synth", "generate a labeled corpus");
  c_synth->add_option("--lib", synth.lib)->required();
  c_synth->add_option("--per-class", synth.per_class);
  c_synth->add_flag("--no-backgrounds", synth.no_backgrounds);
  c_synth->add_option("--threshold", synth.threshold, "library score floor");

  struct {
    std::string data, init;
    int iters = -1;
    bool freeze = false;
    int side = -1;
  } train;
  auto* c_train = app.add_subcommand("train", "train the counting network");
  c_train->add_option("--data", train.data)->required();
  c_train->add_option("--iters", train.iters);
  c_train->add_option("--init", train.init, "checkpoint to continue from");
  c_train->add_flag("--freeze-features", train.freeze,
                    "update only the final layer");
  c_train->add_option("--side", train.side, "input side in pixels");

  struct {
    std::string synth_csv, real_csv;
    int iters1 = -1, iters2 = -1;
    bool freeze = false;
    int side = -1;
  } two_stage;
  auto* c_two = app.add_subcommand("two-stage", "synthetic pretrain + fine-tune");
  c_two->add_option("--synth", two_stage.synth_csv)->required();
  c_two->add_option("--real", two_stage.real_csv)->required();
  c_two->add_option("--iters1", two_stage.iters1);
  c_two->add_option("--iters2", two_stage.iters2);
  c_two->add_flag("--freeze-features", two_stage.freeze,
                  "second stage updates only the final layer");
  c_two->add_option("--side", two_stage.side);

  struct {
    std::string model, data;
  } evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "AP / confusion report");
  c_eval->add_option("--model", evaluate.model)->required();
  c_eval->add_option("--data", evaluate.data)->required();

  struct {
    std::string model, reference, data;
    double threshold = -1.0;
  } featviz;
  auto* c_featviz = app.add_subcommand("featviz", "feature novelty analysis");
  c_featviz->add_option("--model", featviz.model)->required();
  c_featviz->add_option("--reference", featviz.reference)->required();
  c_featviz->add_option("--data", featviz.data)->required();
  c_featviz->add_option("--threshold", featviz.threshold,
                        "novelty cutoff for montages");

  struct {
    std::string detections, counts;
  } cue;
  auto* c_cue = app.add_subcommand("cue", "keep top-N windows by count");
  c_cue->add_option("--detections", cue.detections)->required();
  c_cue->add_option("--counts", cue.counts)->required();

  struct {
    std::string detections;
  } detscore;
  auto* c_detscore = app.add_subcommand("detscore", "threshold sweep PR curve");
  c_detscore->add_option("--detections", detscore.detections)->required();

  struct {
    std::string index, query, method = "sos", model;
    int top = 20;
    int k = -1;
  } retrieve;
  auto* c_retrieve = app.add_subcommand("retrieve", "number-aware tag query");
  c_retrieve->add_option("--index", retrieve.index)->required();
  c_retrieve->add_option("--query", retrieve.query)->required();
  c_retrieve->add_option("--method", retrieve.method,
                         "baseline, text, or sos");
  c_retrieve->add_option("--top", retrieve.top);
  c_retrieve->add_option("--k", retrieve.k, "neighborhood size");
  c_retrieve->add_option("--model", retrieve.model);

  struct {
    std::string index, judgments, method = "sos";
    int top = -1;
    int k = -1;
  } retbench;
  auto* c_retbench = app.add_subcommand("retbench", "nDCG benchmark");
  c_retbench->add_option("--index", retbench.index)->required();
  c_retbench->add_option("--judgments", retbench.judgments)->required();
  c_retbench->add_option("--method", retbench.method);
  c_retbench->add_option("--top", retbench.top);
  c_retbench->add_option("--k", retbench.k, "neighborhood size");

  struct {
    double tolerance = 1e-2;
    bool sabotage = false;
  } gradcheck;
  auto* c_gradcheck = app.add_subcommand("gradcheck", "finite-difference audit");
  c_gradcheck->add_option("--tolerance", gradcheck.tolerance);
  c_gradcheck->add_flag("--sabotage", gradcheck.sabotage,
                        "flip one gradient to prove the audit catches it");

  struct {
    std::string data, model;
    bool no_sos = false;
  } index_cmd;
  auto* c_index = app.add_subcommand("index", "embed a manifest for retrieval");
  c_index->add_option("--data", index_cmd.data)->required();
  c_index->add_option("--model", index_cmd.model)->required();
  c_index->add_flag("--no-sos", index_cmd.no_sos,
                    "skip subitizing scores (baseline index)");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    if (!config_path.empty()) st.cfg = load_config(config_path);
    if (seed_opt->count() > 0) {
      st.cfg.seed = seed_flag;
      st.cfg.train.seed = seed_flag;
    }
    (void)config_opt;

    if (synth.per_class < 0) synth.per_class = st.cfg.per_class;
    if (synth.threshold < 0.0) synth.threshold = st.cfg.library_threshold;
    if (train.iters < 0) train.iters = st.cfg.train.total_iters;
    if (train.side < 0) train.side = st.cfg.input_side;
    if (two_stage.iters1 < 0) two_stage.iters1 = st.cfg.train.total_iters;
    if (two_stage.iters2 < 0) two_stage.iters2 = st.cfg.train.total_iters;
    if (two_stage.side < 0) two_stage.side = st.cfg.input_side;
    if (retbench.top < 0) retbench.top = st.cfg.ndcg_h;
    if (retrieve.k < 0) retrieve.k = st.cfg.knn_k;
    if (retbench.k < 0) retbench.k = st.cfg.knn_k;
    if (featviz.threshold < 0.0) featviz.threshold = st.cfg.novelty_threshold;

    if (app.got_subcommand(c_consolidate)) {
      cmd_consolidate(st, consolidate.annotations);
    } else if (app.got_subcommand(c_split)) {
      cmd_split(st, split.data, split.fraction, split.category, split.zero_test);
    } else if (app.got_subcommand(c_synth)) {
      cmd_synth(st, synth.lib, synth.per_class, synth.no_backgrounds,
                synth.threshold);
    } else if (app.got_subcommand(c_train)) {
      cmd_train(st, train.data, train.iters, train.init, train.freeze,
                train.side);
    } else if (app.got_subcommand(c_two)) {
      cmd_two_stage(st, two_stage.synth_csv, two_stage.real_csv,
                    two_stage.iters1, two_stage.iters2, two_stage.freeze,
                    two_stage.side);
    } else if (app.got_subcommand(c_eval)) {
      cmd_evaluate(st, evaluate.model, evaluate.data);
    } else if (app.got_subcommand(c_featviz)) {
      cmd_featviz(st, featviz.model, featviz.reference, featviz.data,
                  featviz.threshold);
    } else if (app.got_subcommand(c_cue)) {
      cmd_cue(st, cue.detections, cue.counts);
    } else if (app.got_subcommand(c_detscore)) {
      cmd_detscore(st, detscore.detections);
    } else if (app.got_subcommand(c_retrieve)) {
      cmd_retrieve(st, retrieve.index, retrieve.query, retrieve.method,
                   retrieve.top, retrieve.model, retrieve.k);
    } else if (app.got_subcommand(c_retbench)) {
      cmd_retbench(st, retbench.index, retbench.judgments, retbench.method,
                   retbench.top, retbench.k);
    } else if (app.got_subcommand(c_gradcheck)) {
      cmd_gradcheck(st, gradcheck.tolerance, gradcheck.sabotage);
    } else if (app.got_subcommand(c_index)) {
      cmd_index(st, index_cmd.data, index_cmd.model, index_cmd.no_sos);
    }
    return 0;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: io: %s\n", e.what());
    return 3;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: format: %s\n", e.what());
    return 4;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "error: schema: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace sos
