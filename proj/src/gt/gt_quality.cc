#include "rqi/gt/gt_quality.h"

#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/util/parallel.h"

namespace rqi {

std::map<std::string, double> niqe_gt_quality(const std::map<std::string, std::filesystem::path>& references,
                                              const PristineModel& model, int jobs) {
  std::vector<std::pair<std::string, std::filesystem::path>> items(references.begin(), references.end());
  const auto scores = parallel_map(items.size(), jobs, [&](std::size_t i) {
    return -niqe_score(to_luma(load_image(items[i].second)), model);
  });
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < items.size(); ++i) out[items[i].first] = scores[i];
  return out;
}

}  // namespace rqi
