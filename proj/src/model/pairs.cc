#include "rqi/model/pairs.h"

#include <algorithm>
#include <map>

#include "rqi/error.h"
#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/util/csv.h"

namespace rqi {

std::string_view pair_mode_name(PairMode m) {
  switch (m) {
    case PairMode::kArbitrary: return "arbitrary";
    case PairMode::kFrStyle: return "fr";
    case PairMode::kSingleDistortion: return "single";
  }
  return "";
}

PairMode parse_pair_mode(std::string_view name) {
  for (auto m : {PairMode::kArbitrary, PairMode::kFrStyle, PairMode::kSingleDistortion}) {
    if (pair_mode_name(m) == name) return m;
  }
  throw ValidationError("unknown pair mode '" + std::string(name) + "' (arbitrary, fr, single)");
}

LabeledSequence labeled_sequence(const DistortedSequence& seq) {
  LabeledSequence out;
  out.labels.content_id = seq.content_id;
  out.labels.images.push_back({kPristineVariant, kPristineVariant, 100.0});
  out.luma.push_back(to_luma(seq.pristine));
  for (const auto& v : seq.variants) {
    out.labels.images.push_back({variant_id(v.spec), std::string(family_name(v.spec.family)), v.pseudo_mos});
    out.luma.push_back(to_luma(v.image));
  }
  return out;
}

std::vector<LabeledSequence> load_labeled_manifest(const std::filesystem::path& manifest) {
  const CsvTable t = read_csv(manifest);
  t.require_columns({"content_id", "variant_id", "family", "path"});
  std::string q_column = t.has_column("pseudo_mos") ? "pseudo_mos" : "mos";
  t.require_columns({q_column});
  const std::size_t c_id = t.column("content_id"), c_var = t.column("variant_id"), c_fam = t.column("family"),
                    c_path = t.column("path"), c_q = t.column(q_column);
  const std::filesystem::path base = manifest.parent_path();
  std::map<std::string, LabeledSequence> by_content;
  for (const auto& row : t.rows) {
    LabeledSequence& seq = by_content[row[c_id]];
    seq.labels.content_id = row[c_id];
    std::filesystem::path path = row[c_path];
    if (path.is_relative()) path = base / path;
    VariantLabel label{row[c_var], row[c_fam], parse_number(row[c_q])};
    ImagePlane luma = to_luma(load_image(path));
    if (!seq.luma.empty() && (luma.width() != seq.luma[0].width() || luma.height() != seq.luma[0].height())) {
      throw DimensionError("content " + row[c_id] + ": variant " + row[c_var] + " differs in size");
    }
    if (label.family == kPristineVariant) {
      if (!seq.labels.images.empty() && seq.labels.images[0].family == kPristineVariant) {
        throw SchemaError("content " + row[c_id] + " has two pristine rows");
      }
      seq.labels.images.insert(seq.labels.images.begin(), label);
      seq.luma.insert(seq.luma.begin(), std::move(luma));
    } else {
      seq.labels.images.push_back(label);
      seq.luma.push_back(std::move(luma));
    }
  }
  std::vector<LabeledSequence> out;
  for (auto& [id, seq] : by_content) {
    if (seq.labels.images.empty() || seq.labels.images[0].family != kPristineVariant) {
      throw SchemaError("content " + id + " has no pristine row");
    }
    out.push_back(std::move(seq));
  }
  return out;
}

double quality_range(std::span<const SequenceLabels> sequences) {
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& s : sequences) {
    for (const auto& v : s.images) {
      lo = first ? v.quality : std::min(lo, v.quality);
      hi = first ? v.quality : std::max(hi, v.quality);
      first = false;
    }
  }
  return hi - lo;
}

std::vector<PairSample> build_pairs(std::span<const SequenceLabels> sequences, PairMode mode, double q_range) {
  if (sequences.empty()) throw EmptyInput("build_pairs: no sequences");
  if (!(q_range > 0.0)) throw DegenerateInput("build_pairs: quality range must be positive");
  std::vector<PairSample> pairs;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& images = sequences[s].images;
    if (images.empty()) throw EmptyInput("build_pairs: content " + sequences[s].content_id + " has no images");
    const int n = static_cast<int>(images.size());
    auto emit = [&](int a, int b) {
      const double label = std::clamp((images[a].quality - images[b].quality) / q_range, -1.0, 1.0);
      pairs.push_back({sequences[s].content_id, images[a].variant_id, images[b].variant_id, label,
                       static_cast<int>(s), a, b});
    };
    if (mode == PairMode::kFrStyle) {
      for (int i = 1; i < n; ++i) emit(i, 0);
      continue;
    }
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        if (mode == PairMode::kSingleDistortion && a != 0 && b != 0 && images[a].family != images[b].family) {
          continue;
        }
        emit(a, b);
      }
    }
  }
  return pairs;
}

std::vector<PairSample> build_pairs(std::span<const SequenceLabels> sequences, PairMode mode) {
  return build_pairs(sequences, mode, quality_range(sequences));
}

}  // namespace rqi
