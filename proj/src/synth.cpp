#include "sos/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "sos/codec.hpp"
#include "sos/common.hpp"
#include "sos/csv.hpp"

namespace sos {

void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.canvas_size < 8) throw SchemaError("canvas too small");
  auto scale_ok = [](double lo, double hi) {
    return lo > 0.0 && hi >= lo && hi <= 1.5;
  };
  if (!scale_ok(cfg.ref_scale_lo, cfg.ref_scale_hi))
    throw SchemaError("reference scale range outside (0, 1.5]");
  if (!scale_ok(cfg.jitter_lo, cfg.jitter_hi))
    throw SchemaError("jitter range outside (0, 1.5]");
  if (cfg.rotation_deg < 0.0) throw SchemaError("negative rotation range");
  if (cfg.hflip_prob < 0.0 || cfg.hflip_prob > 1.0)
    throw SchemaError("flip probability outside [0,1]");
  if (cfg.max_occlusion < 0.0 || cfg.max_occlusion >= 1.0)
    throw SchemaError("max occlusion outside [0,1)");
  if (cfg.max_attempts < 1) throw SchemaError("attempt budget must be >= 1");
  if (cfg.count_lo < 1 || cfg.count_hi < cfg.count_lo)
    throw SchemaError("bad object count range");
}

CutoutLibrary filter_library(const CutoutLibrary& lib, double threshold) {
  CutoutLibrary out;
  out.warnings = lib.warnings;
  for (const auto& c : lib.cutouts)
    if (c.score >= threshold) out.cutouts.push_back(c);
  for (const auto& b : lib.backgrounds)
    if (b.score >= threshold) out.backgrounds.push_back(b);
  if (out.cutouts.empty())
    out.warnings.push_back("no cutouts at or above " +
                           format_double(threshold));
  if (out.backgrounds.empty())
    out.warnings.push_back("no backgrounds at or above " +
                           format_double(threshold));
  return out;
}

CutoutLibrary read_library_csv(const std::string& csv_path) {
  const auto rows = read_csv(csv_path);
  if (rows.empty() || rows[0] != CsvRow{"kind", "id", "path", "score"})
    throw SchemaError("library csv must start with kind,id,path,score: " +
                      csv_path);
  const std::string base = std::filesystem::path(csv_path).parent_path().string();
  CutoutLibrary lib;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 4)
      throw SchemaError("library row " + std::to_string(i) +
                        " needs 4 columns");
    double score = 0.0;
    try {
      size_t used = 0;
      score = std::stod(row[3], &used);
      if (used != row[3].size()) throw std::invalid_argument(row[3]);
    } catch (const std::exception&) {
      throw SchemaError("bad score '" + row[3] + "' in " + csv_path);
    }
    if (score < 0.0 || score > 1.0)
      throw SchemaError("score outside [0,1] in " + csv_path);
    std::string path = row[2];
    if (!base.empty() && !std::filesystem::path(path).is_absolute())
      path = (std::filesystem::path(base) / path).string();
    if (row[0] == "cutout") {
      for (const auto& c : lib.cutouts)
        if (c.id == row[1])
          throw SchemaError("duplicate cutout id " + row[1]);
      lib.cutouts.push_back({row[1], load_image(path), score});
    } else if (row[0] == "background") {
      for (const auto& b : lib.backgrounds)
        if (b.id == row[1])
          throw SchemaError("duplicate background id " + row[1]);
      lib.backgrounds.push_back({row[1], load_image(path), score});
    } else {
      throw SchemaError("unknown library kind '" + row[0] + "' in " +
                        csv_path);
    }
  }
  return lib;
}

namespace {

const LibraryCutout& find_cutout(const CutoutLibrary& lib,
                                 const std::string& id) {
  for (const auto& c : lib.cutouts)
    if (c.id == id) return c;
  throw SchemaError("unknown cutout id " + id);
}

const LibraryBackground& find_background(const CutoutLibrary& lib,
                                         const std::string& id) {
  for (const auto& b : lib.backgrounds)
    if (b.id == id) return b;
  throw SchemaError("unknown background id " + id);
}

CountLabel label_for_count(int n) {
  if (n <= 0) return CountLabel::Zero;
  if (n >= 4) return CountLabel::FourPlus;
  return label_from_index(n);
}

// the instance's alpha rendered onto a canvas-sized buffer, clipped
std::vector<float> canvas_alpha(const RasterImage& instance, int px, int py,
                                int canvas) {
  std::vector<float> buf(size_t(canvas) * size_t(canvas), 0.0f);
  for (int y = 0; y < instance.height; ++y) {
    const int cy = py + y;
    if (cy < 0 || cy >= canvas) continue;
    for (int x = 0; x < instance.width; ++x) {
      const int cx = px + x;
      if (cx < 0 || cx >= canvas) continue;
      buf[size_t(cy) * canvas + size_t(cx)] = instance.at(x, y, 3);
    }
  }
  return buf;
}

}  // namespace

SynthOutcome generate_image(const CutoutLibrary& lib, const SynthConfig& cfg,
                            const SynthRecipe& recipe) {
  validate_synth_config(cfg);
  if (recipe.n_objects < cfg.count_lo || recipe.n_objects > cfg.count_hi)
    throw SchemaError("object count outside the configured range");
  const LibraryCutout& cutout = find_cutout(lib, recipe.cutout_id);
  const LibraryBackground& background =
      find_background(lib, recipe.background_id);
  if (cutout.image.alpha_mass() <= 0.0)
    throw SchemaError("cutout " + cutout.id + " has empty alpha support");

  const int canvas = cfg.canvas_size;
  const int n = recipe.n_objects;
  Rng rng(recipe.seed);

  SynthOutcome out;
  out.label = label_for_count(n);
  out.log.ref_scale_u = rng.uniform(cfg.ref_scale_lo, cfg.ref_scale_hi);
  const int largest = std::max(cutout.image.width, cutout.image.height);
  const double ref_factor = out.log.ref_scale_u * canvas / largest;

  std::vector<RasterImage> instances;
  for (int i = 0; i < n; ++i) {
    Placement p;
    p.hflip = rng.bernoulli(cfg.hflip_prob);
    const double jitter = rng.uniform(cfg.jitter_lo, cfg.jitter_hi);
    p.scale = ref_factor * jitter;
    p.rotation_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
    p.cx = rng.uniform(0.0, double(canvas));
    p.cy = rng.uniform(0.0, double(canvas));
    RasterImage inst =
        transform_cutout(cutout.image, p.scale, p.rotation_deg, p.hflip);
    p.paste_x = int(std::lround(p.cx - inst.width / 2.0));
    p.paste_y = int(std::lround(p.cy - inst.height / 2.0));
    out.log.instances.push_back(p);
    instances.push_back(std::move(inst));
  }

  // mask-based occlusion accounting: soft (alpha-weighted) and hard pixels
  std::vector<std::vector<float>> masks;
  for (int i = 0; i < n; ++i)
    masks.push_back(canvas_alpha(instances[size_t(i)],
                                 out.log.instances[size_t(i)].paste_x,
                                 out.log.instances[size_t(i)].paste_y, canvas));
  bool accepted = true;
  for (int i = 0; i < n; ++i) {
    const double total_soft = instances[size_t(i)].alpha_mass();
    int64_t total_hard = 0;
    for (int y = 0; y < instances[size_t(i)].height; ++y)
      for (int x = 0; x < instances[size_t(i)].width; ++x)
        if (instances[size_t(i)].at(x, y, 3) > 0.5f) ++total_hard;

    double soft = 0.0;
    int64_t hard = 0;
    const auto& mine = masks[size_t(i)];
    for (size_t p = 0; p < mine.size(); ++p) {
      if (mine[p] <= 0.0f) continue;
      double keep = mine[p];
      bool covered = false;
      for (int j = i + 1; j < n; ++j) {
        keep *= 1.0 - double(masks[size_t(j)][p]);
        covered = covered || masks[size_t(j)][p] > 0.5f;
      }
      soft += keep;
      if (mine[p] > 0.5f && !covered) ++hard;
    }
    Placement& placement = out.log.instances[size_t(i)];
    placement.visible_fraction = total_soft > 0.0 ? soft / total_soft : 0.0;
    placement.visible_binary =
        total_hard > 0 ? double(hard) / double(total_hard) : 0.0;
    const double floor = 1.0 - cfg.max_occlusion;
    if (placement.visible_fraction < floor || placement.visible_binary < floor)
      accepted = false;
  }
  out.accepted = accepted;
  if (!accepted) return out;

  out.image = resize_bilinear(background.image, canvas, canvas);
  for (int i = 0; i < n; ++i)
    alpha_composite_inplace(out.image, instances[size_t(i)],
                            out.log.instances[size_t(i)].paste_x,
                            out.log.instances[size_t(i)].paste_y);
  return out;
}

namespace {

nlohmann::json placement_json(const PlacementLog& log) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : log.instances) {
    arr.push_back({{"cx", p.cx},
                   {"cy", p.cy},
                   {"scale", p.scale},
                   {"rotation_deg", p.rotation_deg},
                   {"hflip", p.hflip},
                   {"paste_x", p.paste_x},
                   {"paste_y", p.paste_y},
                   {"visible_fraction", p.visible_fraction},
                   {"visible_binary", p.visible_binary}});
  }
  return arr;
}

std::string class_file_name(int count, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth_%d_%05d.png", count, index);
  return buf;
}

}  // namespace

CorpusResult generate_corpus(const CutoutLibrary& lib, const SynthConfig& cfg,
                             int per_class, uint64_t base_seed,
                             bool include_backgrounds,
                             const std::string& out_dir) {
  validate_synth_config(cfg);
  if (per_class < 1) throw SchemaError("per-class count must be >= 1");
  if (lib.cutouts.empty()) throw SchemaError("library holds no cutouts");
  if (lib.backgrounds.empty()) throw SchemaError("library holds no backgrounds");
  std::filesystem::create_directories(out_dir);

  CorpusResult result;
  std::string provenance;

  if (include_backgrounds) {
    for (int k = 0; k < per_class; ++k) {
      const auto& bg = lib.backgrounds[size_t(k) % lib.backgrounds.size()];
      char buf[32];
      std::snprintf(buf, sizeof(buf), "zero_%05d.png", k);
      const std::string name = buf;
      save_image(resize_bilinear(bg.image, cfg.canvas_size, cfg.canvas_size),
                 (std::filesystem::path(out_dir) / name).string());
      ManifestEntry entry;
      entry.image_path = name;
      entry.label = CountLabel::Zero;
      result.manifest.entries.push_back(entry);
      ++result.accepted;
      nlohmann::json line = {
          {"image", name}, {"label", 0}, {"background", bg.id}};
      provenance += line.dump() + "\n";
    }
  }

  for (int count = cfg.count_lo; count <= cfg.count_hi; ++count) {
    const uint64_t class_seed = mix_seed(base_seed, uint64_t(count));
    int produced = 0;
    for (int k = 0; k < per_class; ++k) {
      const uint64_t image_seed = mix_seed(class_seed, uint64_t(k));
      bool done = false;
      for (int attempt = 0; attempt < cfg.max_attempts && !done; ++attempt) {
        const uint64_t attempt_seed = mix_seed(image_seed, uint64_t(attempt));
        Rng sel(mix_seed(attempt_seed, 1));
        SynthRecipe recipe;
        recipe.seed = mix_seed(attempt_seed, 2);
        recipe.n_objects = count;
        recipe.cutout_id =
            lib.cutouts[size_t(sel.uniform_int(0, int64_t(lib.cutouts.size()) - 1))]
                .id;
        recipe.background_id =
            lib.backgrounds[size_t(sel.uniform_int(
                                0, int64_t(lib.backgrounds.size()) - 1))]
                .id;
        SynthOutcome outcome = generate_image(lib, cfg, recipe);
        if (!outcome.accepted) {
          ++result.rejected;
          continue;
        }
        const std::string name = class_file_name(count, k);
        save_image(outcome.image,
                   (std::filesystem::path(out_dir) / name).string());
        ManifestEntry entry;
        entry.image_path = name;
        entry.label = outcome.label;
        result.manifest.entries.push_back(entry);
        ++result.accepted;
        ++produced;
        nlohmann::json line = {{"image", name},
                               {"label", count},
                               {"seed", std::to_string(recipe.seed)},
                               {"cutout", recipe.cutout_id},
                               {"background", recipe.background_id},
                               {"ref_u", outcome.log.ref_scale_u},
                               {"attempts", attempt + 1},
                               {"placements", placement_json(outcome.log)}};
        provenance += line.dump() + "\n";
        done = true;
      }
    }
    if (produced < per_class) {
      const std::string note = "class " + std::to_string(count) + ": " +
                               std::to_string(produced) + " of " +
                               std::to_string(per_class);
      result.shortfalls.push_back(note);
      nlohmann::json line = {{"shortfall", note}};
      provenance += line.dump() + "\n";
    }
  }

  write_text_file((std::filesystem::path(out_dir) / "provenance.jsonl").string(),
                  provenance);
  write_manifest_csv(
      (std::filesystem::path(out_dir) / "manifest.csv").string(),
      result.manifest);
  return result;
}

}  // namespace sos
