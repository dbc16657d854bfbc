#include "sos/config.hpp"

#include <charconv>
#include <filesystem>
#include <set>
#include <sstream>

#include "sos/common.hpp"
#include "sos/csv.hpp"

namespace sos {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw SchemaError("bad number '" + v + "' for " + key);
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw SchemaError("bad integer '" + v + "' for " + key);
  return out;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw SchemaError("bad seed '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw SchemaError("bad flag '" + v + "' for " + key + " (use true/false)");
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw SchemaError("line " + std::to_string(line_no) +
                        " is not key=value: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw SchemaError("repeated key " + key);

    if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "synth.canvas_size") cfg.synth.canvas_size = parse_int(key, value);
    else if (key == "synth.ref_scale_lo") cfg.synth.ref_scale_lo = parse_double(key, value);
    else if (key == "synth.ref_scale_hi") cfg.synth.ref_scale_hi = parse_double(key, value);
    else if (key == "synth.jitter_lo") cfg.synth.jitter_lo = parse_double(key, value);
    else if (key == "synth.jitter_hi") cfg.synth.jitter_hi = parse_double(key, value);
    else if (key == "synth.rotation_deg") cfg.synth.rotation_deg = parse_double(key, value);
    else if (key == "synth.hflip_prob") cfg.synth.hflip_prob = parse_double(key, value);
    else if (key == "synth.max_occlusion") cfg.synth.max_occlusion = parse_double(key, value);
    else if (key == "synth.max_attempts") cfg.synth.max_attempts = parse_int(key, value);
    else if (key == "synth.count_lo") cfg.synth.count_lo = parse_int(key, value);
    else if (key == "synth.count_hi") cfg.synth.count_hi = parse_int(key, value);
    else if (key == "synth.per_class") cfg.per_class = parse_int(key, value);
    else if (key == "synth.include_backgrounds") cfg.include_backgrounds = parse_bool(key, value);
    else if (key == "library.threshold") cfg.library_threshold = parse_double(key, value);
    else if (key == "net.input_side") cfg.input_side = parse_int(key, value);
    else if (key == "train.batch_size") cfg.train.batch_size = parse_int(key, value);
    else if (key == "train.base_lr") cfg.train.base_lr = parse_double(key, value);
    else if (key == "train.lr_decay") cfg.train.lr_decay = parse_double(key, value);
    else if (key == "train.step_iters") cfg.train.step_iters = parse_int(key, value);
    else if (key == "train.total_iters") cfg.train.total_iters = parse_int(key, value);
    else if (key == "train.momentum") cfg.train.momentum = parse_double(key, value);
    else if (key == "train.freeze_features") cfg.train.freeze_features = parse_bool(key, value);
    else if (key == "train.log_every") cfg.train.log_every = parse_int(key, value);
    else if (key == "eval.knn_k") cfg.knn_k = parse_int(key, value);
    else if (key == "eval.ndcg_h") cfg.ndcg_h = parse_int(key, value);
    else if (key == "eval.novelty_threshold") cfg.novelty_threshold = parse_double(key, value);
    else if (key == "eval.iou_threshold") cfg.iou_threshold = parse_double(key, value);
    else throw SchemaError("unknown config key " + key);
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

std::string render_config(const PipelineConfig& cfg) {
  std::string out;
  auto put = [&](const std::string& key, const std::string& value) {
    out += key + "=" + value + "\n";
  };
  put("seed", std::to_string(cfg.seed));
  put("synth.canvas_size", std::to_string(cfg.synth.canvas_size));
  put("synth.ref_scale_lo", format_double(cfg.synth.ref_scale_lo));
  put("synth.ref_scale_hi", format_double(cfg.synth.ref_scale_hi));
  put("synth.jitter_lo", format_double(cfg.synth.jitter_lo));
  put("synth.jitter_hi", format_double(cfg.synth.jitter_hi));
  put("synth.rotation_deg", format_double(cfg.synth.rotation_deg));
  put("synth.hflip_prob", format_double(cfg.synth.hflip_prob));
  put("synth.max_occlusion", format_double(cfg.synth.max_occlusion));
  put("synth.max_attempts", std::to_string(cfg.synth.max_attempts));
  put("synth.count_lo", std::to_string(cfg.synth.count_lo));
  put("synth.count_hi", std::to_string(cfg.synth.count_hi));
  put("synth.per_class", std::to_string(cfg.per_class));
  put("synth.include_backgrounds", cfg.include_backgrounds ? "true" : "false");
  put("library.threshold", format_double(cfg.library_threshold));
  put("net.input_side", std::to_string(cfg.input_side));
  put("train.batch_size", std::to_string(cfg.train.batch_size));
  put("train.base_lr", format_double(cfg.train.base_lr));
  put("train.lr_decay", format_double(cfg.train.lr_decay));
  put("train.step_iters", std::to_string(cfg.train.step_iters));
  put("train.total_iters", std::to_string(cfg.train.total_iters));
  put("train.momentum", format_double(cfg.train.momentum));
  put("train.freeze_features", cfg.train.freeze_features ? "true" : "false");
  put("train.log_every", std::to_string(cfg.train.log_every));
  put("eval.knn_k", std::to_string(cfg.knn_k));
  put("eval.ndcg_h", std::to_string(cfg.ndcg_h));
  put("eval.novelty_threshold", format_double(cfg.novelty_threshold));
  put("eval.iou_threshold", format_double(cfg.iou_threshold));
  return out;
}

void write_resolved_config(const std::string& dir, const PipelineConfig& cfg) {
  std::filesystem::create_directories(dir);
  const std::string body =
      std::string("# ") + kToolVersion + "\n" + render_config(cfg);
  write_text_file((std::filesystem::path(dir) / "config.resolved").string(),
                  body);
}

}  // namespace sos
