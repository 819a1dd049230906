// Copyright 2026 The BurnSeer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "burnseer/app.hpp"
#include "fixtures.hpp"

using namespace burnseer;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
  json doc() const { return json::parse(out); }
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

// Keeps the environment free of BURNSEER_* for the duration of a test.
struct EnvGuard {
  std::vector<std::string> names;
  void set(const std::string& name, const std::string& value) {
    ::setenv(name.c_str(), value.c_str(), 1);
    names.push_back(name);
  }
  ~EnvGuard() {
    for (const auto& n : names) ::unsetenv(n.c_str());
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

}  // namespace

TEST_CASE("simulate, build, correlate, train and predict through the command line") {
  fixture::TempDir dir;
  const std::string d = "--data-dir=" + dir.str();

  auto sim = run({d, "--json", "simulate", "--runs", "80", "--seed", "3", "--fail-fraction", "0.1"});
  REQUIRE(sim.code == 0);
  const auto s = sim.doc();
  CHECK(s["runs"] == 80);
  CHECK(s["completed"].get<int>() + s["failed"].get<int>() == 80);

  auto build = run({d, "--json", "build-dataset", "--schedule", "45,300"});
  REQUIRE(build.code == 0);
  CHECK(build.doc()["rows"] == s["completed"]);
  CHECK(build.doc()["excluded"] == s["failed"]);

  auto cor = run({d, "--json", "correlate"});
  REQUIRE(cor.code == 0);
  CHECK(cor.doc()["names"].size() == cor.doc()["values"].size());

  auto train = run({d, "--json", "train"});
  REQUIRE(train.code == 0);
  const auto models = train.doc()["models"];
  CHECK(models["cpu_usage_total"].size() == 2);
  CHECK(models["memory_usage_peak"].size() == 2);
  CHECK(models["schedule"] == "45,300");

  // a completed run replayed mid-flight
  const auto runs = run({d, "--json", "runs", "list", "--status", "completed"}).doc();
  const std::string id = runs[0]["run_id"];
  auto early = run({d, "--json", "predict", "--run", id, "--at", "30"});
  CHECK(early.code == 1);
  CHECK(early.doc()["error"]["code"] == "PredictionNotReady");
  CHECK(early.doc()["error"]["remaining_seconds"] == 15.0);
  CHECK(early.err.find("error: PredictionNotReady") != std::string::npos);

  auto mid = run({d, "--json", "predict", "--run", id, "--at", "100"});
  REQUIRE(mid.code == 0);
  CHECK(mid.doc()["refresh_time"] == 100.0);
  CHECK(mid.doc()["actual"] == false);

  auto done = run({d, "--json", "predict", "--run", id});
  REQUIRE(done.code == 0);
  CHECK(done.doc()["actual"] == true);

  auto text = run({d, "predict", "--run", id, "--at", "100"});
  CHECK(text.code == 0);
  CHECK(text.out.find("predicted totals for " + id + " at 100 s") != std::string::npos);
}

TEST_CASE("predict is a thin adapter over the library predictor") {
  fixture::TempDir dir;
  const std::string d = "--data-dir=" + dir.str();
  REQUIRE(run({d, "simulate", "--runs", "60", "--seed", "9"}).code == 0);
  REQUIRE(run({d, "build-dataset"}).code == 0);
  REQUIRE(run({d, "train"}).code == 0);

  const Workspace ws(dir.str());
  const auto store = ws.load_store();
  const auto registry = ws.load_registry();
  const auto models = ws.load_models();
  const auto run_rec = registry.list_runs({RunStatus::Completed}).back();
  RunRecord in_flight = run_rec;
  in_flight.status = RunStatus::Running;
  in_flight.stop.reset();
  RunRegistry scratch;
  scratch.import_records({in_flight});
  Predictor p(store, scratch);
  p.start_tracking(run_rec.run_id, {}, models.cpu, models.mem);
  const auto expected = p.request_refresh(run_rec.run_id, *run_rec.start + to_ms(350));

  auto cli = run({d, "--json", "predict", "--run", run_rec.run_id, "--at", "350"});
  REQUIRE(cli.code == 0);
  CHECK(cli.doc() == json::parse(to_json(expected).dump()));
  CHECK(cli.doc()["cpu_feature_offset"] == 300.0);
}

TEST_CASE("usage and module errors map to exit codes") {
  fixture::TempDir dir;
  const std::string d = "--data-dir=" + dir.str();

  auto bogus = run({"bogus"});
  CHECK(bogus.code == 2);
  CHECK(bogus.err.find("UnknownCommand") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({d, "simulate", "--runs", "abc"}).code == 2);

  REQUIRE(run({d, "simulate", "--runs", "5", "--seed", "2"}).code == 0);
  auto sched = run({d, "--json", "build-dataset", "--schedule", "300,45"});
  CHECK(sched.code == 1);
  CHECK(sched.doc()["error"]["code"] == "InvalidSchedule");

  write_text(dir.file("empty.csv"), "run_id,area,cpu_usage_total,memory_usage_peak\n");
  auto empty = run({d, "--json", "train", dir.file("empty.csv")});
  CHECK(empty.code == 1);
  CHECK(empty.doc()["error"]["code"] == "EmptyDataset");

  auto no_models = run({d, "predict", "--run", "run-0000", "--at", "60"});
  CHECK(no_models.code == 1);
  CHECK(no_models.err.find("ModelUnavailable") != std::string::npos);

  write_text(dir.file("bad.json"), "{not json");
  auto bad = run({d, "--json", "ingest", dir.file("bad.json")});
  CHECK(bad.code == 1);
  CHECK(bad.doc()["error"]["code"] == "MalformedDump");

  CHECK(run({d, "--json", "runs", "import", dir.file("missing.json")}).doc()["error"]["code"] == "IoError");
  CHECK(run({d, "--json", "train", "--target", "runtime"}).code == 1);
}

TEST_CASE("ingest and runs import fill an empty workspace") {
  fixture::TempDir src;
  fixture::TempDir dst;
  REQUIRE(run({"--data-dir=" + src.str(), "simulate", "--runs", "12", "--seed", "4", "--out-metrics",
               src.file("dump.json"), "--out-runs", src.file("runs.json")})
              .code == 0);
  const std::string d = "--data-dir=" + dst.str();
  auto ing = run({d, "--json", "ingest", src.file("dump.json")});
  REQUIRE(ing.code == 0);
  CHECK(ing.doc()["rejected"] == 0);
  auto imp = run({d, "--json", "runs", "import", src.file("runs.json")});
  REQUIRE(imp.code == 0);
  CHECK(imp.doc()["runs"] == 12);

  // importing the same manifest again is rejected as a whole
  CHECK(run({d, "runs", "import", src.file("runs.json")}).code == 1);
  CHECK(Workspace(dst.str()).load_registry().size() == 12);
  CHECK(Workspace(dst.str()).load_store() == Workspace(src.str()).load_store());
}

TEST_CASE("settings resolve as flags, then environment, then config file, then defaults") {
  fixture::TempDir dir;
  EnvGuard env;
  const std::string d = "--data-dir=" + dir.str();
  auto runs_of = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{d, "--json", "simulate", "--seed", "1"};
    args.insert(args.end(), extra.begin(), extra.end());
    auto r = run(args);
    REQUIRE(r.code == 0);
    return r.doc()["runs"].get<int>();
  };

  CHECK(runs_of({}) == 900);
  write_text(dir.file("cfg.toml"), "[simulate]\nruns = 7\n");
  env.set("BURNSEER_CONFIG", dir.file("cfg.toml"));
  CHECK(runs_of({}) == 7);
  env.set("BURNSEER_RUNS", "6");
  CHECK(runs_of({}) == 6);
  CHECK(runs_of({"--runs", "5"}) == 5);

  // top-level keys and an explicit --config
  fixture::TempDir other;
  write_text(dir.file("top.toml"), "data-dir = \"" + other.str() + "\"\n[simulate]\nruns = 3\n");
  ::unsetenv("BURNSEER_RUNS");
  auto r = run({"--config", dir.file("top.toml"), "--json", "simulate", "--seed", "1"});
  REQUIRE(r.code == 0);
  CHECK(r.doc()["runs"] == 3);
  CHECK(Workspace(other.str()).load_registry().size() == 3);

  auto missing = run({"--json", "--config", dir.file("missing.toml"), "simulate"});
  CHECK(missing.code == 2);
  CHECK(missing.doc()["error"]["code"] == "InvalidConfig");
}
