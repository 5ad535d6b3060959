// test_config.cc

// Copyright 2026 SDVAD Authors
//
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


#include <cmath>
#include <fstream>

#include <doctest.h>

#include "sdvad/config.h"
#include "test_util.h"

using namespace sdvad;
using sdvad::testing::TempDir;

TEST_SUITE("config") {

TEST_CASE("defaults follow the documented values") {
  const EngineConfig c;
  CHECK(c.n_mels == 36);
  CHECK(c.n_ceps == 20);
  CHECK(c.sample_rate == 8000);
  CHECK(c.vad_post.smooth == 10);
  CHECK(c.vad_post.min_gap == 10);
  CHECK(c.sdvad.train.learning_rate == 0.05);
  CHECK(c.sdvad.train.clip_norm == 5.0);
  CHECK(c.sdvad.train.epochs == 20);
  CHECK(c.sdvad.train.batch_size == 1);
  CHECK(c.sdvad.hidden == 64);
  CHECK(c.sdvad.layers == 2);
  CHECK(c.tv.ivector_dim == 32);
  CHECK(c.ubm.num_components == 64);
  CHECK(c.sdvad.augment == 1.0);
  CHECK(c.sdvad.flip_targets);
  CHECK(c.dataset.n_train == 20);
  CHECK(c.dataset.n_dev == 4);
  CHECK(c.dataset.n_test == 8);
  CHECK(c.tolerance == 10);
  CHECK(c.UbmPath() == "exp/ubm.mdl");
  CHECK(c.SdvadPath() == "exp/sdvad.mdl");
  CHECK_NOTHROW(c.Validate());
}

TEST_CASE("set: parsing, ranges, unknown keys") {
  EngineConfig c;
  c.Set("sdvad.bin", "4");
  CHECK(c.sdvad.bin == 4);
  c.Set("vad.augment", "0.25");
  CHECK(c.vad.augment == 0.25);
  CHECK_THROWS_AS(c.Set("vad.augment", "1.5"), ConfigError);
  c.Set("sdvad.augment_scale", "2");
  CHECK(c.sdvad.augment_scale == 2.0);
  CHECK_THROWS_AS(c.Set("sdvad.augment_scale", "-1"), ConfigError);
  c.Set("sdvad.flip_targets", "0");
  CHECK_FALSE(c.sdvad.flip_targets);
  CHECK_THROWS_AS(c.Set("sdvad.select_best", "2"), ConfigError);
  c.Set("sdvad.arch", " mlp ");
  CHECK(c.sdvad.arch == "mlp");
  c.Set("corpus.snr_db", "inf");
  CHECK(std::isinf(c.dataset.snr_db));
  c.Set("feats.n_mels", "40");
  CHECK(c.dataset.synth.n_mels == 40);
  c.Set("exp.dir", "/tmp/x");
  CHECK(c.VadPath() == "/tmp/x/vad.mdl");
  c.Set("model.vad", "v.mdl");
  CHECK(c.VadPath() == "v.mdl");
  CHECK_THROWS_AS(c.Set("sdvad.bins", "4"), ConfigError);
  CHECK_THROWS_AS(c.Set("sdvad.bin", "0"), ConfigError);
  CHECK_THROWS_AS(c.Set("sdvad.bin", "4x"), ConfigError);
  CHECK_THROWS_AS(c.Set("sdvad.arch", "cnn"), ConfigError);
  CHECK_THROWS_AS(c.Set("sdvad.lr", "nan"), ConfigError);
  CHECK_THROWS_AS(c.Set("sdvad.threshold", "1"), ConfigError);
  CHECK_THROWS_AS(c.Set("ubm.seed", "-1"), ConfigError);
}

TEST_CASE("validation catches inconsistent settings") {
  EngineConfig c;
  c.Set("feats.n_ceps", "40");
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = EngineConfig();
  c.Set("corpus.enroll_per_speaker", "10");
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = EngineConfig();
  c.Set("feats.frame_shift_ms", "30");
  CHECK_THROWS_AS(c.Validate(), ConfigError);
}

TEST_CASE("config files and dump round trip") {
  TempDir dir("cfg");
  {
    std::ofstream os(dir / "a.conf");
    os << "# comment line\n\n  sdvad.epochs = 3   # trailing comment\nubm.components=8\n";
  }
  EngineConfig c;
  LoadConfigFile(dir / "a.conf", &c);
  CHECK(c.sdvad.train.epochs == 3);
  CHECK(c.ubm.num_components == 8);

  c.Set("corpus.snr_db", "inf");
  c.Set("sdvad.lr", "0.1");
  std::ofstream(dir / "dump.conf") << c.Dump();
  EngineConfig d;
  LoadConfigFile(dir / "dump.conf", &d);
  CHECK(d.Dump() == c.Dump());
  const std::string dump = c.Dump();
  CHECK(EngineConfig::Keys().size() ==
        static_cast<std::size_t>(std::count(dump.begin(), dump.end(), '\n')));

  std::ofstream(dir / "bad.conf") << "ubm.components=8\nnot a pair\n";
  try {
    LoadConfigFile(dir / "bad.conf", &c);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("bad.conf:2") != std::string::npos);
  }
  std::ofstream(dir / "unknown.conf") << "\nfoo.bar=1\n";
  try {
    LoadConfigFile(dir / "unknown.conf", &c);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("unknown.conf:2") != std::string::npos);
    CHECK(std::string(e.what()).find("foo.bar") != std::string::npos);
  }
  CHECK_THROWS_AS(LoadConfigFile(dir / "missing.conf", &c), ConfigError);
}

TEST_CASE("error classes map to exit codes") {
  auto code = [](const Error &e) { return ExitCode(e.kind()); };
  CHECK(code(DataError("x")) == 1);
  CHECK(code(FormatError("x")) == 1);
  CHECK(code(ConfigError("x")) == 2);
  CHECK(code(ContractError("x")) == 2);
  CHECK(code(NumericalError("x")) == 3);
}

}  // TEST_SUITE
