#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rqi/metrics/niqe.h"

namespace rqi {

// GT quality as negated NIQE (higher is better), computed on the luma of each
// content's reference image. Contents map to image paths; work fans out over
// `jobs` workers and the result does not depend on the worker count.
std::map<std::string, double> niqe_gt_quality(const std::map<std::string, std::filesystem::path>& references,
                                              const PristineModel& model, int jobs = 1);

}  // namespace rqi
