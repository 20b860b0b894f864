#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <functional>
#include <set>
#include <vector>

#include "common.h"

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<acceptance::Outcome()>> criteria{
      acceptance::criterion1, acceptance::criterion2, acceptance::criterion3,
      acceptance::criterion4, acceptance::criterion5, acceptance::criterion6,
      acceptance::criterion7, acceptance::criterion8, acceptance::criterion9};
  const std::set<int> selected(only.begin(), only.end());

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) {
      continue;
    }
    acceptance::Stopwatch clock;
    acceptance::Outcome outcome;
    try {
      outcome = criteria[i]();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf(
        "criterion %d: %s (%.1fs) %s\n",
        id,
        outcome.pass ? "PASS" : "FAIL",
        clock.seconds(),
        outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
