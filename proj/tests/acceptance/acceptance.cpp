// Acceptance runner: one line per criterion, at the catalog defaults.
//
//   fpslab_acceptance --criterion 5
//   fpslab_acceptance            (all twelve)

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fpslab/campaigns.hpp"
#include "fpslab/io.hpp"
#include "fpslab/parallel.hpp"

namespace {

std::string failed_checks(const fpslab::TestReport& r) {
  std::string s;
  for (const auto& c : r.checks)
    if (!c.pass) s += (s.empty() ? "" : ", ") + c.name;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> criteria;
  fpslab::RunOptions opts;
  opts.workers = 0;
  std::string profile_dir, json_out;
  app.add_option("--criterion", criteria, "criterion number (repeatable; default all)")->check(CLI::Range(1, 12));
  app.add_option("--seed", opts.seed, "master seed");
  app.add_option("--samples", opts.samples, "override every sample count (smoke runs only)");
  app.add_option("--workers", opts.workers, "worker threads (default: FPSLAB_WORKERS or all cores)");
  app.add_option("--profiles", profile_dir, "directory with calibration profiles");
  app.add_option("--json", json_out, "write the full reports here");
  CLI11_PARSE(app, argc, argv);
  if (opts.workers <= 0) opts.workers = fpslab::default_workers();
  if (criteria.empty())
    for (int c = 1; c <= 12; ++c) criteria.push_back(c);

  fpslab::ProfileStore profiles(profile_dir);
  nlohmann::json all = nlohmann::json::array();
  bool ok = true;
  for (int c : criteria) {
    const auto& def = fpslab::find_test(c);
    const auto r = fpslab::run_test(def.name, nlohmann::json::object(), opts, profiles);
    char head[160];
    std::snprintf(head, sizeof head, "criterion %2d  %-24s %s  %7.1f s", c, def.name.c_str(),
                  r.pass ? "PASS" : "FAIL", r.seconds);
    std::cout << head;
    if (!r.error.empty()) std::cout << "  error: " << r.error;
    else if (!r.pass) std::cout << "  failed: " << failed_checks(r);
    std::cout << std::endl;
    ok = ok && r.pass;
    all.push_back(r.to_json());
  }
  if (!json_out.empty()) fpslab::write_file_atomic(json_out, all.dump(2));
  return ok ? 0 : 1;
}
