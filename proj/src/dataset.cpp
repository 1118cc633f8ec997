#include "dapointr/dataset.hpp"

#include "dapointr/cloud_io.hpp"
#include "dapointr/errors.hpp"
#include "dapointr/random.hpp"

#include <algorithm>

namespace dapointr {
namespace fs = std::filesystem;

std::vector<Sample> load_split(const fs::path& dir, bool require_complete, std::size_t input_points) {
  const fs::path partial_dir = dir / "partial";
  if (!fs::is_directory(partial_dir)) throw InvalidInput("missing split directory '" + partial_dir.string() + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(partial_dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidInput("no clouds in '" + partial_dir.string() + "'");

  std::vector<Sample> out;
  std::vector<std::string> missing;
  for (const auto& f : files) {
    Sample s;
    s.id = f.stem().string();
    const auto us = s.id.find('_');
    s.category = us == std::string::npos ? "all" : s.id.substr(us + 1);
    s.partial = io::read_cloud(f);
    if (input_points > 0) s.partial = geometry::resample(s.partial, input_points, derive_seed(0, s.id));
    const fs::path gt = dir / "complete" / f.filename();
    if (fs::exists(gt)) s.complete = io::read_cloud(gt);
    else missing.push_back(s.id);
    out.push_back(std::move(s));
  }
  if (require_complete && !missing.empty()) {
    std::string ids;
    for (const auto& m : missing) ids += (ids.empty() ? "" : ", ") + m;
    throw InvalidInput("missing ground truth in '" + dir.string() + "' for: " + ids);
  }
  return out;
}

fs::path resolve_eval_split(const fs::path& dir) {
  if (fs::is_directory(dir / "partial")) return dir;
  if (fs::is_directory(dir / "target" / "eval" / "partial")) return dir / "target" / "eval";
  throw InvalidInput("'" + dir.string() + "' is neither a split nor a benchmark directory");
}

}  // namespace dapointr
