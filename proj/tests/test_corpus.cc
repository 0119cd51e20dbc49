// tests/test_corpus.cc

// Copyright 2026  The alignsv Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "alignsv/corpus.h"
#include "alignsv/io.h"
#include "test_util.h"

namespace alignsv {
namespace {

namespace fs = std::filesystem;

SyntheticSpec SmallSpec() {
  SyntheticSpec s;
  s.num_speakers = 5;
  s.num_phrases = 2;
  s.sessions = 4;
  s.segments = 3;
  s.dim = 6;
  s.channel_rank = 2;
  s.dev_speakers = 1;
  s.eval_speakers = 2;
  s.seed = 3;
  return s;
}

UtteranceRecord Rec(const std::string& spk, const std::string& ph, int session,
                    const std::string& part = "eval") {
  UtteranceRecord r;
  r.utterance_id = spk + "_" + ph + "_" + std::to_string(session);
  r.speaker_id = spk;
  r.phrase_id = ph;
  r.session = session;
  r.partition = part;
  return r;
}

TEST_SUITE("corpus") {

TEST_CASE("generation is deterministic and order independent") {
  SyntheticCorpus a(SmallSpec()), b(SmallSpec());
  SyntheticUtterance late = b.Generate(4, 1, 4);
  SyntheticUtterance u = a.Generate(4, 1, 4);
  CHECK(u.features == late.features);
  CHECK(u.segment_starts == late.segment_starts);
  SyntheticSpec other = SmallSpec();
  other.seed = 4;
  CHECK(SyntheticCorpus(other).Generate(4, 1, 4).features != u.features);
  CHECK_THROWS_AS(a.Generate(5, 0, 1), InputError);
  CHECK_THROWS_AS(a.Generate(0, 0, 0), InputError);
}

TEST_CASE("planted segments are increasing with the right count") {
  SyntheticCorpus c(SmallSpec());
  for (int spk = 0; spk < 5; ++spk)
    for (int ph = 0; ph < 2; ++ph)
      for (int s = 1; s <= 4; ++s) {
        SyntheticUtterance u = c.Generate(spk, ph, s);
        REQUIRE(u.segment_starts.size() == 3u);
        CHECK(u.segment_starts[0] == 0);
        for (size_t k = 1; k < 3; ++k) {
          const int dwell = u.segment_starts[k] - u.segment_starts[k - 1];
          CHECK(dwell >= 4);
          CHECK(dwell <= 8);
        }
        const int last = static_cast<int>(u.features.cols()) - u.segment_starts[2];
        CHECK(last >= 4);
        CHECK(last <= 8);
      }
}

TEST_CASE("no noise and no jitter gives identical sessions") {
  SyntheticSpec s = SmallSpec();
  s.noise = 0.0;
  s.dwell_min = s.dwell_max = 5;
  SyntheticCorpus c(s);
  for (int ph = 0; ph < 2; ++ph) {
    Matrix first = c.Generate(2, ph, 1).features;
    for (int ses = 2; ses <= 4; ++ses) CHECK(c.Generate(2, ph, ses).features == first);
  }
}

TEST_CASE("well separated speakers are found by nearest centroid") {
  SyntheticSpec s = SmallSpec();
  s.num_speakers = 2;
  s.dev_speakers = 0;
  s.eval_speakers = 0;
  s.speaker_offset = 3.0;
  s.noise = 0.1;
  s.sessions = 9;
  SyntheticCorpus c(s);
  std::vector<Vector> centroid(2, Vector::Zero(s.dim));
  for (int spk = 0; spk < 2; ++spk)
    for (int ses = 1; ses <= 3; ++ses)
      centroid[spk] += c.Generate(spk, 0, ses).features.rowwise().mean() / 3.0;
  for (int spk = 0; spk < 2; ++spk)
    for (int ses = 4; ses <= 9; ++ses) {
      Vector m = c.Generate(spk, 0, ses).features.rowwise().mean();
      const int guess = (m - centroid[0]).norm() < (m - centroid[1]).norm() ? 0 : 1;
      CHECK(guess == spk);
    }
}

TEST_CASE("spec validation") {
  SyntheticSpec s = SmallSpec();
  s.num_speakers = 1;
  CHECK_THROWS_AS(s.Validate(), ConfigError);
  s = SmallSpec();
  s.segments = 1;
  CHECK_THROWS_AS(s.Validate(), ConfigError);
  s = SmallSpec();
  s.noise = -1.0;
  CHECK_THROWS_AS(s.Validate(), ConfigError);
  s = SmallSpec();
  s.dev_speakers = 4;
  CHECK_THROWS_AS(s.Validate(), ConfigError);
}

TEST_CASE("written corpus round-trips through ingestion") {
  test::TempDir dir;
  CorpusManifest m = GenerateCorpus(SmallSpec(), dir.path());
  CHECK(m.records.size() == 5u * 2u * 4u);
  CorpusManifest in = IngestManifest(dir.file("manifest.txt"));
  REQUIRE(in.records.size() == m.records.size());
  SyntheticCorpus c(SmallSpec());
  std::map<std::string, std::vector<int>> sidecar;
  std::ifstream b(dir.file("boundaries.txt"));
  std::string line;
  while (std::getline(b, line)) {
    std::istringstream ls(line);
    std::string id;
    ls >> id;
    int v;
    while (ls >> v) sidecar[id].push_back(v);
  }
  CHECK(sidecar.size() == m.records.size());
  std::set<std::string> partitions;
  for (const UtteranceRecord& r : in.records) {
    partitions.insert(r.partition);
    const int spk = std::stoi(r.speaker_id.substr(3));
    const int ph = std::stoi(r.phrase_id.substr(2));
    SyntheticUtterance u = c.Generate(spk, ph, r.session);
    Matrix f = ReadFeatureFile(r.resolved_path);
    // Files hold 32-bit floats.
    CHECK((f - u.features).cwiseAbs().maxCoeff() <= 1e-5 * (1.0 + u.features.cwiseAbs().maxCoeff()));
    CHECK(sidecar[r.utterance_id] == u.segment_starts);
    CHECK(r.partition == c.PartitionOf(spk));
  }
  CHECK(partitions == std::set<std::string>{"bkg", "dev", "eval"});
  CHECK(in.Speakers("eval").size() == 2u);
  CHECK(in.Speakers("dev").size() == 1u);

  // Same spec, same bytes.
  test::TempDir again;
  GenerateCorpus(SmallSpec(), again.path());
  for (const UtteranceRecord& r : m.records)
    CHECK(ReadFileBytes(dir.file(r.path)) == ReadFileBytes(again.file(r.path)));
  CHECK(ReadFileBytes(dir.file("manifest.txt")) == ReadFileBytes(again.file("manifest.txt")));
}

TEST_CASE("generation into an unwritable place fails") {
  test::TempDir dir;
  std::ofstream(dir.file("blocker")) << "x";
  CHECK_THROWS_AS(GenerateCorpus(SmallSpec(), dir.file("blocker") + "/sub"), IoError);
}

TEST_CASE("ingestion reports every problem") {
  test::TempDir dir;
  for (const char* f : {"a.svfm", "b.svfm", "c.svfm"}) WriteFeatureFile(dir.file(f), Matrix::Ones(2, 3));
  {
    std::ofstream out(dir.file("good.txt"));
    out << "# id spk phrase session partition path\n"
        << "u1 s1 p1 1 bkg a.svfm\n"
        << "u2 s1 p1 2 bkg b.svfm  # trailing comment\n\n"
        << "u3 s2 p1 1 eval " << dir.file("c.svfm") << "\n";
  }
  CorpusManifest m = IngestManifest(dir.file("good.txt"));
  REQUIRE(m.records.size() == 3u);
  CHECK(m.records[1].session == 2);
  CHECK(m.records[0].resolved_path == dir.file("a.svfm"));

  auto expect_problem = [&](const std::string& body, const std::string& needle) {
    std::ofstream(dir.file("bad.txt")) << body;
    try {
      IngestManifest(dir.file("bad.txt"));
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_problem("u1 s1 p1 1 bkg a.svfm\nu1 s1 p1 2 bkg b.svfm\n", "duplicate utterance id u1");
  expect_problem("u1 s1 p1 1 bkg a.svfm\nu2 s1 p1 2 eval b.svfm\n", "speaker s1");
  expect_problem("u1 s1 p1 1 bkg missing.svfm\n", "missing file");
  expect_problem("u1 s1 p1 1 bkg\n", "expected 6 fields");
  expect_problem("u1 s1 p1 x bkg a.svfm\n", "bad session");
  expect_problem("u1 s1 p1 1 train a.svfm\n", "unknown partition");
  CHECK_THROWS_AS(IngestManifest(dir.file("nope.txt")), IoError);
}

TEST_CASE("trial construction") {
  CorpusManifest m;
  for (const char* spk : {"a", "b"})
    for (int s = 1; s <= 4; ++s) m.records.push_back(Rec(spk, "p", s));
  TrialList t = BuildTrials(m, "eval", 3);
  CHECK(t.models.size() == 2u);
  int target = 0, nontarget = 0;
  for (const TrialKey& k : t.trials) (k.target ? target : nontarget)++;
  CHECK(target == 2);
  CHECK(nontarget == 2);
  CHECK(t.models[0].utterances.size() == 3u);

  // Two phrases, extra speaker without test sessions.
  CorpusManifest m2;
  for (const char* spk : {"a", "b", "c"})
    for (const char* ph : {"p", "q"})
      for (int s = 1; s <= (spk[0] == 'c' ? 3 : 5); ++s) m2.records.push_back(Rec(spk, ph, s));
  m2.records.push_back(Rec("z", "p", 1, "dev"));
  TrialList t2 = BuildTrials(m2, "eval", 3);
  CHECK(t2.skipped_models == 2);
  CHECK(t2.models.size() == 4u);
  std::map<std::string, std::string> phrase_of;
  std::set<std::string> enroll_utts;
  for (const UtteranceRecord& r : m2.records) phrase_of[r.utterance_id] = r.phrase_id;
  for (const EnrollmentModel& em : t2.models)
    for (const std::string& u : em.utterances) enroll_utts.insert(u);
  for (const TrialKey& k : t2.trials) {
    const std::string model_phrase = k.enroll_id.substr(k.enroll_id.find('-') + 1);
    CHECK(phrase_of[k.test_id] == model_phrase);
    CHECK(enroll_utts.count(k.test_id) == 0);
  }
  // 4 models x (2 speakers x 2 test sessions) of the same phrase.
  CHECK(t2.trials.size() == 16u);
  TrialList t3 = BuildTrials(m2, "eval", 3);
  REQUIRE(t3.trials.size() == t2.trials.size());
  for (size_t i = 0; i < t2.trials.size(); ++i) {
    CHECK(t3.trials[i].enroll_id == t2.trials[i].enroll_id);
    CHECK(t3.trials[i].test_id == t2.trials[i].test_id);
  }
  CHECK_THROWS_AS(BuildTrials(m2, "bkg", 3), InputError);
}

TEST_CASE("enrollment file round trip") {
  test::TempDir dir;
  std::vector<EnrollmentModel> models{{"a-p", "a", "p", {"u1", "u2"}}, {"b-p", "b", "p", {"u3"}}};
  WriteEnrollmentFile(dir.file("enroll.txt"), models);
  std::vector<EnrollmentModel> back = ReadEnrollmentFile(dir.file("enroll.txt"));
  REQUIRE(back.size() == 2u);
  CHECK(back[0].utterances == models[0].utterances);
  CHECK(back[1].speaker_id == "b");
}

}  // TEST_SUITE

}  // namespace
}  // namespace alignsv
