#include "slidereg/pipeline/batch.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/image_io.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace slidereg {

namespace {

std::string trim(const std::string &s) {
  const auto a = s.find_first_not_of(" \t\r\"");
  const auto b = s.find_last_not_of(" \t\r\"");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

// Stage file names for the registered rows (index 1..4 of kEvaluationStages).
constexpr std::array<const char *, 4> kFileStages{kStagePrealign, kStageTissue, kStageBlockwise,
                                                  kStageOffset};

nlohmann::ordered_json number_or_null(std::optional<double> v) {
  if (!v || !std::isfinite(*v))
    return nullptr;
  return *v;
}

} // namespace

std::vector<ManifestEntry> load_manifest(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error("cannot read manifest: " + path.string());
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string &cell) -> std::filesystem::path {
    const std::string t = trim(cell);
    if (t.empty())
      return {};
    std::filesystem::path p(t);
    return p.is_absolute() ? p : base / p;
  };
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line)[0] == '#')
      continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ','))
      cells.push_back(cell);
    if (out.empty() && line_no == 1 && !cells.empty() && trim(cells[0]).rfind("ref", 0) == 0 &&
        cells.size() >= 2 && trim(cells[1]).rfind("mov", 0) == 0)
      continue;
    if (cells.size() < 2 || trim(cells[0]).empty() || trim(cells[1]).empty())
      throw Error(path.string() + ":" + std::to_string(line_no) +
                  ": expected ref_image,mov_image[,ref_landmarks,mov_landmarks]");
    ManifestEntry e;
    e.ref = resolve(cells[0]);
    e.mov = resolve(cells[1]);
    if (cells.size() >= 4) {
      e.ref_landmarks = resolve(cells[2]);
      e.mov_landmarks = resolve(cells[3]);
    }
    out.push_back(e);
  }
  return out;
}

int BatchReport::exit_code() const {
  bool any_ok = false, all_ok = true;
  for (const auto &p : pairs) {
    any_ok = any_ok || p.ok;
    all_ok = all_ok && p.ok && !p.partial;
  }
  if (all_ok)
    return 0;
  return any_ok ? 2 : 1;
}

std::array<std::optional<StageMetrics>, kEvaluationStages.size()>
evaluate_stages(const TransformFile &file, const LandmarkSet &ref, const LandmarkSet &mov,
                int ref_width, int ref_height) {
  std::array<std::optional<StageMetrics>, kEvaluationStages.size()> out;
  auto eval = [&](const PlanarTransform &t) {
    const LandmarkSet moved = transform_landmarks(mov, t);
    StageMetrics sm;
    sm.rtre = rtre(tre(ref, moved), ref_width, ref_height);
    if (!sm.rtre.empty()) {
      sm.summary = aggregate({sm.rtre}).pairs.front();
      sm.summary.robustness = robustness(ref, mov, moved);
    }
    return sm;
  };
  out[0] = eval(PlanarTransform::identity());
  for (std::size_t i = 0; i < kFileStages.size(); ++i)
    if (const PlanarTransform *t = file.stage(kFileStages[i]))
      out[i + 1] = eval(*t);
  return out;
}

BatchReport run_batch(const std::filesystem::path &manifest_path, const PipelineConfig &config,
                      const std::filesystem::path &out_dir) {
  config.validate();
  const auto entries = load_manifest(manifest_path);
  const auto model = resolve_model_path(config);
  BatchReport report;
  report.pairs.resize(entries.size());

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string load_error;
  auto worker = [&] {
    std::unique_ptr<Extractor> extractor;
    try {
      extractor = load_extractor(model);
    } catch (const Error &e) {
      std::lock_guard lock(error_mutex);
      load_error = e.what();
      return;
    }
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      PairEvaluation &pe = report.pairs[i];
      pe.entry = entries[i];
      try {
        std::ostringstream name;
        name << "pair_" << std::setw(3) << std::setfill('0') << i;
        const RegistrationResult r =
            run_pipeline(pe.entry.ref, pe.entry.mov, config, *extractor,
                         out_dir.empty() ? std::filesystem::path() : out_dir / name.str());
        pe.ok = true;
        pe.partial = r.partial;
        pe.error = r.error;
        pe.transform = r.file;
        if (pe.entry.has_landmarks()) {
          const LandmarkSet ref_l = load_landmarks(pe.entry.ref_landmarks);
          const LandmarkSet mov_l = load_landmarks(pe.entry.mov_landmarks);
          const auto &fr = r.file.frame.at("reference");
          pe.stages = evaluate_stages(r.file, ref_l, mov_l, fr.at("width").get<int>(),
                                      fr.at("height").get<int>());
        }
      } catch (const std::exception &e) {
        pe.ok = false;
        pe.error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(config.workers, static_cast<int>(entries.size())));
  std::vector<std::thread> threads;
  for (int t = 0; t < n; ++t)
    threads.emplace_back(worker);
  for (auto &t : threads)
    t.join();
  if (!load_error.empty())
    throw Error(load_error);

  for (std::size_t s = 0; s < kEvaluationStages.size(); ++s) {
    std::vector<std::vector<double>> lists;
    std::vector<double> rob;
    for (const auto &p : report.pairs)
      if (p.stages[s] && !p.stages[s]->rtre.empty()) {
        lists.push_back(p.stages[s]->rtre);
        rob.push_back(p.stages[s]->summary.robustness.value_or(0.0));
      }
    if (!lists.empty())
      report.stages[s] = aggregate(lists, rob);
  }
  return report;
}

std::string batch_report_json(const BatchReport &report) {
  nlohmann::ordered_json j;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto &p : report.pairs) {
    nlohmann::ordered_json pj;
    pj["reference"] = p.entry.ref.string();
    pj["moving"] = p.entry.mov.string();
    pj["status"] = !p.ok ? "failed" : (p.partial ? "partial" : "ok");
    if (!p.error.empty())
      pj["error"] = p.error;
    auto stages = nlohmann::ordered_json::object();
    for (std::size_t s = 0; s < kEvaluationStages.size(); ++s)
      if (p.stages[s])
        stages[kEvaluationStages[s]] = {
            {"median_rtre", p.stages[s]->summary.median_rtre},
            {"max_rtre", p.stages[s]->summary.max_rtre},
            {"robustness", number_or_null(p.stages[s]->summary.robustness)}};
    pj["stages"] = stages;
    pairs.push_back(pj);
  }
  j["pairs"] = pairs;
  auto summary = nlohmann::ordered_json::object();
  for (std::size_t s = 0; s < kEvaluationStages.size(); ++s)
    if (report.stages[s])
      summary[kEvaluationStages[s]] = {{"MMrTRE", report.stages[s]->mm_rtre},
                                       {"AMrTRE", report.stages[s]->am_rtre},
                                       {"AMaxrTRE", report.stages[s]->amax_rtre},
                                       {"robustness", number_or_null(report.stages[s]->mean_robustness)}};
  j["summary"] = summary;
  j["exit_code"] = report.exit_code();
  return j.dump(2) + "\n";
}

std::string batch_report_csv(const BatchReport &report) {
  std::ostringstream os;
  os << std::setprecision(17) << "pair,stage,median_rtre,max_rtre,robustness\n";
  for (std::size_t i = 0; i < report.pairs.size(); ++i)
    for (std::size_t s = 0; s < kEvaluationStages.size(); ++s)
      if (const auto &m = report.pairs[i].stages[s]) {
        os << i << ',' << kEvaluationStages[s] << ',' << m->summary.median_rtre << ','
           << m->summary.max_rtre << ',';
        if (m->summary.robustness)
          os << *m->summary.robustness;
        os << '\n';
      }
  return os.str();
}

std::string boxplot_csv(const BatchReport &report) {
  std::ostringstream os;
  os << std::setprecision(17) << "stage,pair,median_rtre\n";
  for (std::size_t s = 0; s < kEvaluationStages.size(); ++s)
    for (std::size_t i = 0; i < report.pairs.size(); ++i)
      if (const auto &m = report.pairs[i].stages[s])
        os << kEvaluationStages[s] << ',' << i << ',' << m->summary.median_rtre << '\n';
  return os.str();
}

void write_batch_report(const BatchReport &report, const std::filesystem::path &out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "report.json", batch_report_json(report));
  write_file_atomic(out_dir / "report.csv", batch_report_csv(report));
  write_file_atomic(out_dir / "boxplot.csv", boxplot_csv(report));
}

} // namespace slidereg
