// SPDX-License-Identifier: Apache-2.0
#include "avmask/training/ablation.hpp"

#include <cstdio>
#include <json.hpp>

#include "avmask/core/errors.hpp"

namespace avmask {

std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::mask_ratio: return "mask_ratio";
    case AblationAxis::cross_attention: return "cross_attention";
    case AblationAxis::modalities: return "modalities";
  }
  return "?";
}

AblationAxis ablation_axis_from_string(const std::string& s) {
  if (s == "mask_ratio") return AblationAxis::mask_ratio;
  if (s == "cross_attention") return AblationAxis::cross_attention;
  if (s == "modalities") return AblationAxis::modalities;
  throw ParameterError("axis: expected mask_ratio, cross_attention or modalities, got '" + s + "'");
}

std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(AblationAxis axis,
                                                                        const ExperimentConfig& base) {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  auto variant = [&](std::string name, auto&& edit) {
    ExperimentConfig c = base;
    edit(c);
    c.finetune.use_cross_attention = c.pretrain.use_cross_attention;
    c.finetune.modalities = c.pretrain.modalities;
    out.emplace_back(std::move(name), std::move(c));
  };
  switch (axis) {
    case AblationAxis::mask_ratio:
      for (double r : {0.75, 0.90, 0.95}) {
        char name[16];
        std::snprintf(name, sizeof name, "%.0f%%", r * 100.0);
        variant(name, [r](ExperimentConfig& c) { c.pretrain.mask_ratio = r; });
      }
      break;
    case AblationAxis::cross_attention:
      variant("w/", [](ExperimentConfig& c) { c.pretrain.use_cross_attention = true; });
      variant("w/o", [](ExperimentConfig& c) { c.pretrain.use_cross_attention = false; });
      break;
    case AblationAxis::modalities:
      variant("AV", [](ExperimentConfig& c) { c.pretrain.modalities = Modalities::audio_visual; });
      variant("V-only", [](ExperimentConfig& c) { c.pretrain.modalities = Modalities::visual_only; });
      break;
  }
  return out;
}

AblationRow run_variant(const std::string& name, const ExperimentConfig& cfg, const PreparedDataset& train,
                        const PreparedDataset& test) {
  AblationRow row;
  row.variant = name;
  row.mask_ratio = cfg.pretrain.mask_ratio;
  row.cross_attention = cfg.pretrain.use_cross_attention;
  row.modalities = cfg.pretrain.modalities;

  auto pre = pretrain(cfg.model, cfg.pretrain, train);
  row.final_loss = pre.losses.back();
  EvalOptions eval = cfg.eval;
  eval.mask_ratio = cfg.pretrain.mask_ratio;
  row.recon_mse = evaluate(*pre.model, test, eval).recon_mse;

  if (cfg.run_finetune) {
    const Checkpoint ckpt = make_checkpoint(*pre.model);
    pre.model.reset();
    TrainConfig ft = cfg.finetune;
    ft.use_cross_attention = cfg.pretrain.use_cross_attention;
    ft.modalities = cfg.pretrain.modalities;
    auto tuned = finetune(cfg.model, ft, train, &ckpt);
    auto r = evaluate(*tuned.model, test, eval);
    row.top1 = r.top1;
    row.top5 = r.top5;
  }
  return row;
}

AblationTable run_ablation(AblationAxis axis, const ExperimentConfig& base, const PreparedDataset& train,
                           const PreparedDataset& test) {
  AblationTable table{to_string(axis), {}};
  for (const auto& [name, cfg] : ablation_variants(axis, base)) table.rows.push_back(run_variant(name, cfg, train, test));
  return table;
}

std::string ablation_json(const AblationTable& t) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["axis"] = t.axis;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json o;
    o["variant"] = r.variant;
    o["mask_ratio"] = r.mask_ratio;
    o["cross_attention"] = r.cross_attention;
    o["modalities"] = to_string(r.modalities);
    o["final_loss"] = r.final_loss;
    o["recon_mse"] = r.recon_mse;
    o["top1"] = opt(r.top1);
    o["top5"] = opt(r.top5);
    rows.push_back(o);
  }
  j["rows"] = rows;
  return j.dump(2);
}

std::string ablation_text(const AblationTable& t) {
  auto opt = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string("-");
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  std::string out = "ablation: " + t.axis + "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %6s %6s %-7s %11s %11s %8s %8s\n", "variant", "ratio", "cross", "input",
                "final_loss", "recon_mse", "top1", "top5");
  out += line;
  for (const auto& r : t.rows) {
    std::snprintf(line, sizeof line, "%-8s %6.2f %6s %-7s %11.6f %11.6f %8s %8s\n", r.variant.c_str(), r.mask_ratio,
                  r.cross_attention ? "yes" : "no", to_string(r.modalities).c_str(), r.final_loss, r.recon_mse,
                  opt(r.top1).c_str(), opt(r.top5).c_str());
    out += line;
  }
  return out;
}

}  // namespace avmask
