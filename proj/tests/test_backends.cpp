/*
 * Copyright 2026 The byovla Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <fstream>
#include <sstream>
#include <thread>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>

#include "support.hpp"

#include "byovla/backends/client.hpp"
#include "byovla/backends/protocol.hpp"
#include "byovla/backends/registry.hpp"
#include "byovla/backends/server.hpp"
#include "byovla/backends/stubs.hpp"
#include "byovla/intervene.hpp"
#include "byovla/mask.hpp"
#include "byovla/testbed.hpp"

extern char** environ;

using namespace byovla;
using namespace byovla::test;
using nlohmann::json;

namespace {

std::vector<std::string> golden_lines() {
  std::ifstream in(std::string(BYOVLA_GOLDEN_DIR) + "/responses_v1.jsonl");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

// Answers every exchange with the next scripted line.
class ScriptedTransport : public Transport {
 public:
  explicit ScriptedTransport(std::vector<std::string> lines) : lines_(std::move(lines)) {}
  std::string exchange(const std::string& request) override {
    requests.push_back(request);
    if (fail_first_ > 0) {
      --fail_first_;
      throw BackendUnavailable("scripted", "down");
    }
    return lines_.at(next_++);
  }
  std::string describe() const override { return "scripted"; }
  void fail_first(int n) { fail_first_ = n; }
  std::vector<std::string> requests;

 private:
  std::vector<std::string> lines_;
  std::size_t next_ = 0;
  int fail_first_ = 0;
};

TaskContext start_context(const testbed::SceneSpec& s) {
  const auto& d = s.dynamics;
  return {s.instruction, Proprio{d.start_x, d.start_y, d.start_z, 0.0}};
}

std::shared_ptr<Client> stub_process(const std::string& fault, int fault_on = 1,
                                     int timeout_ms = 10000) {
  std::vector<std::string> argv{BYOVLA_STUB_SERVER};
  if (!fault.empty()) {
    argv.insert(argv.end(), {"--fault", fault, "--fault-on", std::to_string(fault_on),
                             "--sleep-ms", "3000"});
  }
  return std::make_shared<Client>("policy",
                                  std::make_unique<SubprocessTransport>(argv, timeout_ms));
}

}  // namespace

TEST_CASE("hand-written responses decode to known values") {
  const auto lines = golden_lines();
  REQUIRE(lines.size() == 6);

  const json seg = json::parse(lines[0]);
  CHECK_NOTHROW(protocol::check_envelope(seg, 7));
  const auto masks = protocol::parse_segment_response(seg, {"cup"}, 4, 3);
  REQUIRE(masks.size() == 1);
  CHECK(masks[0].score == 0.875);
  CHECK((rle_decode(masks[0].rle) == rect_bitmap(4, 3, 1, 0, 2, 1)).all());
  CHECK_THROWS_CODE(protocol::parse_segment_response(seg, {"mug"}, 4, 3),
                    ErrorCode::kProtocolError);
  CHECK_THROWS_CODE(protocol::parse_segment_response(seg, {"cup"}, 3, 4),
                    ErrorCode::kProtocolError);

  const json pred = json::parse(lines[1]);
  const auto chunks = protocol::parse_predict_response(pred, 1, 2);
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0](0, 0) == 0.5);
  CHECK(chunks[0](0, 1) == -0.25);
  CHECK(chunks[0](0, 6) == 1.0);
  CHECK(chunks[0](1, 2) == 0.0625);
  CHECK_THROWS_CODE(protocol::parse_predict_response(pred, 2, 2), ErrorCode::kProtocolError);
  CHECK_THROWS_CODE(protocol::parse_predict_response(pred, 1, 4), ErrorCode::kProtocolError);
  CHECK_NOTHROW(protocol::parse_predict_response(pred, 1, -1));

  const auto prop = protocol::parse_propose_response(json::parse(lines[2]));
  CHECK(prop.not_relevant_objects == std::vector<std::string>{"orange", "blue towel"});
  CHECK(prop.not_relevant_backgrounds == std::vector<std::string>{"wall"});

  CHECK(protocol::is_error(json::parse(lines[3])));
  CHECK_FALSE(protocol::is_error(pred));
  CHECK_THROWS_CODE(protocol::check_envelope(pred, 9), ErrorCode::kProtocolError);
}

TEST_CASE("malformed payloads raise ProtocolError with the payload") {
  const json bad_rows = json::parse(R"({"chunks":[[[1,2,3]]]})");
  CHECK_THROWS_CODE(protocol::parse_predict_response(bad_rows, 1, -1), ErrorCode::kProtocolError);
  const json ragged = json::parse(R"({"chunks":[[[0,0,0,0,0,0,1]],[[0,0,0,0,0,0,1],[0,0,0,0,0,0,1]]]})");
  CHECK_THROWS_CODE(protocol::parse_predict_response(ragged, 2, -1), ErrorCode::kProtocolError);
  const json text = json::parse(R"({"chunks":[[["a",0,0,0,0,0,1]]]})");
  CHECK_THROWS_CODE(protocol::parse_predict_response(text, 1, -1), ErrorCode::kProtocolError);
  const json bad_rle = json::parse(R"({"masks":[{"label":"cup","score":0.5,"rle":{"w":2,"h":2,"runs":[1,1]}}]})");
  try {
    protocol::parse_segment_response(bad_rle, {"cup"}, 2, 2);
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(json::parse(e.payload()) == bad_rle.at("masks").at(0));
  }
  const json score = json::parse(R"({"masks":[{"label":"cup","score":1.5,"rle":{"w":2,"h":2,"runs":[4]}}]})");
  CHECK_THROWS_CODE(protocol::parse_segment_response(score, {"cup"}, 2, 2), ErrorCode::kProtocolError);
  CHECK_THROWS_CODE(protocol::parse_predict_request(json{{"image", "!!"}, {"instruction", "x"}, {"k", 1}}),
                    ErrorCode::kProtocolError);
  CHECK_THROWS_CODE(protocol::op_from_string("dance"), ErrorCode::kProtocolError);
}

TEST_CASE("requests round trip through the codec") {
  std::mt19937_64 gen(3);
  const Image img = random_image(gen, 9, 7);
  const PredictRequest req{img, {"stack the cups", Proprio{0.1, 0.2, 0.3, 1.0}}, 4, 1234567890123ULL};
  const PredictRequest back = protocol::parse_predict_request(protocol::predict_request(req));
  CHECK(back.image == img);
  CHECK(back.context.instruction == req.context.instruction);
  CHECK(back.context.proprio == req.context.proprio);
  CHECK(back.k == 4);
  CHECK(back.seed == req.seed);

  const Bitmap m = random_bitmap(gen, 9, 7, 0.3);
  const auto inp = protocol::parse_inpaint_request(protocol::inpaint_request({img, rle_encode(m), 2}));
  CHECK(inp.mask == rle_encode(m));
  CHECK(inp.dilation == 2);

  ActionChunk c = ActionChunk::Random(4, kActionDim);
  c.col(6) = c.col(6).cwiseAbs();
  const std::vector<ActionChunk> chunks(3, c);
  // Doubles survive the JSON text exactly.
  CHECK(protocol::parse_predict_response(json::parse(protocol::predict_response(chunks).dump()), 3, 4) ==
        chunks);
}

TEST_CASE("remote error codes map to typed errors") {
  const auto lines = golden_lines();
  auto run = [&](const std::string& line) {
    auto t = std::make_unique<ScriptedTransport>(std::vector<std::string>{line});
    auto ids = std::make_shared<std::atomic<std::uint64_t>>(json::parse(line).at("id").get<std::uint64_t>() - 1);
    Client c("vlm", std::move(t), 0, ids);
    c.call(protocol::Op::kPropose, json::object());
  };
  CHECK_THROWS_CODE(run(lines[3]), ErrorCode::kShapeError);
  CHECK_THROWS_CODE(run(lines[4]), ErrorCode::kProtocolError);
  CHECK_THROWS_CODE(run(lines[5]), ErrorCode::kBackendUnavailable);
}

TEST_CASE("client ids, envelopes, retries and transcripts") {
  auto transcript = std::make_shared<Transcript>();
  auto ids = std::make_shared<std::atomic<std::uint64_t>>(0);
  auto t = std::make_unique<ScriptedTransport>(std::vector<std::string>{
      R"({"v":"1","id":1,"ok":true})", R"({"v":"1","id":5,"ok":true})",
      R"({"v":"0","id":3,"ok":true})", "not json"});
  ScriptedTransport* raw = t.get();
  Client c("seg", std::move(t), 2, ids, transcript);

  CHECK(c.call(protocol::Op::kSegment, {{"labels", json::array()}}).at("ok") == true);
  const json sent = json::parse(raw->requests.at(0));
  CHECK(sent.at("v") == "1");
  CHECK(sent.at("id") == 1);
  CHECK(sent.at("op") == "segment");

  CHECK_THROWS_CODE(c.call(protocol::Op::kSegment, json::object()), ErrorCode::kProtocolError);
  CHECK_THROWS_CODE(c.call(protocol::Op::kSegment, json::object()), ErrorCode::kProtocolError);
  CHECK_THROWS_CODE(c.call(protocol::Op::kSegment, json::object()), ErrorCode::kProtocolError);
  CHECK(ids->load() == 4);
  CHECK(transcript->size() == 4);
  CHECK(transcript->entries()[3].response == "not json");
  CHECK(transcript->entries_for("seg").size() == 4);
  CHECK(transcript->entries_for("vlm").empty());

  // Two transient failures, then success within the retry budget.
  auto flaky = std::make_unique<ScriptedTransport>(std::vector<std::string>{R"({"v":"1","id":1})"});
  flaky->fail_first(2);
  Client retrying("policy", std::move(flaky), 2);
  CHECK_NOTHROW(retrying.call(protocol::Op::kPredict, json::object()));
  auto down = std::make_unique<ScriptedTransport>(std::vector<std::string>{R"({"v":"1","id":1})"});
  down->fail_first(3);
  Client giving_up("policy", std::move(down), 2);
  CHECK_THROWS_CODE(giving_up.call(protocol::Op::kPredict, json::object()),
                    ErrorCode::kBackendUnavailable);
}

TEST_CASE("transcripts save, load and replay byte for byte") {
  const testbed::SceneSpec scene = testbed::builtin_scene("standard");
  const auto rendered = testbed::render(scene);
  StubPolicy sim(scene, 3);
  ProtocolServer server({&sim, nullptr, nullptr, nullptr, nullptr});

  auto transcript = std::make_shared<Transcript>();
  auto live = std::make_shared<Client>(
      "policy",
      std::make_unique<LoopbackTransport>([&](const std::string& l) { return server.handle(l); }),
      0, nullptr, transcript);
  RemotePolicy remote(live, 4);
  std::vector<std::vector<ActionChunk>> recorded;
  for (std::uint64_t s = 0; s < 3; ++s)
    recorded.push_back(remote.predict({rendered.image, start_context(scene), 2, s}));

  TempDir dir("transcript");
  transcript->save(dir.path() / "t.jsonl");
  const Transcript loaded = Transcript::load(dir.path() / "t.jsonl");
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded.entries()[i].request == transcript->entries()[i].request);
    CHECK(loaded.entries()[i].response == transcript->entries()[i].response);
  }

  auto replay_transcript = std::make_shared<Transcript>();
  RemotePolicy replayed(std::make_shared<Client>(
                            "policy", std::make_unique<ReplayTransport>(loaded.entries_for("policy")),
                            0, nullptr, replay_transcript),
                        4);
  for (std::uint64_t s = 0; s < 3; ++s)
    CHECK(replayed.predict({rendered.image, start_context(scene), 2, s}) == recorded[s]);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(replay_transcript->entries()[i].request == transcript->entries()[i].request);

  // A different request diverges from the recording.
  RemotePolicy diverging(std::make_shared<Client>(
                             "policy", std::make_unique<ReplayTransport>(loaded.entries_for("policy"))),
                         4);
  CHECK_THROWS_CODE(diverging.predict({rendered.image, start_context(scene), 2, 99}),
                    ErrorCode::kProtocolError);
  ReplayTransport exhausted({});
  CHECK_THROWS_CODE(exhausted.exchange("{}"), ErrorCode::kProtocolError);
  CHECK_THROWS_CODE(Transcript::load(dir.path() / "missing.jsonl"), ErrorCode::kIoError);
}

TEST_CASE("server turns bad requests into error responses") {
  const testbed::SceneSpec scene = testbed::builtin_scene("standard");
  StubPolicy sim(scene, 3);
  ProtocolServer server({&sim, nullptr, nullptr, nullptr, nullptr});
  auto code_of = [&](const std::string& line) { return json::parse(server.handle(line)).value("code", ""); };
  CHECK(code_of("{{{") == "bad_request");
  CHECK(code_of(R"({"v":"1"})") == "bad_request");
  CHECK(code_of(R"({"v":"2","id":1,"op":"predict"})") == "unsupported_version");
  CHECK(code_of(R"({"v":"1","id":1,"op":"segment"})") == "unsupported");
  CHECK(code_of(R"({"v":"1","id":1,"op":"predict","k":1})") == "bad_request");
  const json req = protocol::envelope(
      4, protocol::Op::kPredict, protocol::predict_request({Image(8, 8), {"x", std::nullopt}, 1, 0}));
  const json resp = json::parse(server.handle(req.dump()));
  CHECK(resp.at("code") == "ShapeError");
  CHECK(resp.at("id") == 4);
}

TEST_CASE("stub segmenter rectangles come back as exact runs") {
  StubSeg seg({StubSeg::rectangle("cup", 4, 3, 1, 0, 2, 1, 0.875)});
  const auto out = seg.segment(Image(4, 3), {"cup", "fork"}, 0.4, 0.4);
  REQUIRE(out.size() == 1);
  CHECK(out[0].rle.runs == std::vector<std::int64_t>{1, 2, 2, 2, 5});
  CHECK(out[0].score == 0.875);
  // The wire form matches the hand-written golden line.
  const json expected = json::parse(golden_lines()[0]);
  json got = protocol::segment_response(out);
  got["v"] = "1";
  got["id"] = 7;
  CHECK(got == expected);
}

TEST_CASE("loopback inpainting equals direct inpainting") {
  std::mt19937_64 gen(8);
  const Image img = random_image(gen, 24, 20);
  const Bitmap m = rect_bitmap(24, 20, 5, 5, 12, 9);
  StubInpaint direct;
  ProtocolServer server({nullptr, nullptr, nullptr, &direct, nullptr});
  RemoteInpaint remote(std::make_shared<Client>(
      "inpaint",
      std::make_unique<LoopbackTransport>([&](const std::string& l) { return server.handle(l); })));
  CHECK(remote.inpaint(img, rle_encode(m), 2) == direct.inpaint(img, rle_encode(m), 2));
  CHECK(direct.inpaint(img, rle_encode(m), 2) == onion_peel_fill(img, dilate(m, 2)));
}

TEST_CASE("registry builds stubs, loopback clients and disabled endpoints") {
  const PipelineConfig cfg;
  const json spec{{"scene", "standard"},
                  {"policy", {{"transport", "loopback"}}},
                  {"seg", {{"transport", "loopback"}}},
                  {"attn", {{"transport", "none"}}}};
  BackendSet set = make_backends(spec, cfg);
  CHECK(set.scene.has_value());
  CHECK(set.attn == nullptr);
  const auto r = testbed::render(*set.scene);
  StubPolicy direct(*set.scene, cfg.horizon);
  const PredictRequest req{r.image, start_context(*set.scene), 2, 17};
  CHECK(set.policy->predict(req) == direct.predict(req));
  CHECK(set.transcript->entries_for("policy").size() == 1);
  set.seg->segment(r.image, {"orange"}, 0.4, 0.4);
  CHECK(set.transcript->size() == 2);

  CHECK_THROWS_CODE(make_backends(json{{"policy", {{"transport", "stub"}}}}, cfg),
                    ErrorCode::kFixtureMissing);
  CHECK_THROWS_CODE(make_backends(json{{"scene", "standard"}, {"policy", {{"transport", "pigeon"}}}}, cfg),
                    ErrorCode::kInvalidArgument);
}

TEST_CASE("subprocess stub server answers like the in-process stub") {
  const testbed::SceneSpec scene = testbed::builtin_scene("standard");
  const auto r = testbed::render(scene);
  StubPolicy direct(scene, 3);
  RemotePolicy remote(stub_process(""), 4);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const PredictRequest req{r.image, start_context(scene), 3, s};
    CHECK(remote.predict(req) == direct.predict(req));
  }
}

TEST_CASE("faulty server responses are typed and leave the client usable") {
  const testbed::SceneSpec scene = testbed::builtin_scene("standard");
  const auto r = testbed::render(scene);
  StubPolicy direct(scene, 3);
  const PredictRequest req{r.image, start_context(scene), 2, 5};
  for (const char* fault : {"garbage", "wrong_id", "bad_k", "bad_version"}) {
    CAPTURE(fault);
    RemotePolicy remote(stub_process(fault), 4);
    CHECK_THROWS_CODE(remote.predict(req), ErrorCode::kProtocolError);
    CHECK(remote.predict(req) == direct.predict(req));
  }
}

TEST_CASE("a hung or dead server becomes BackendUnavailable") {
  const testbed::SceneSpec scene = testbed::builtin_scene("standard");
  const auto r = testbed::render(scene);
  const PredictRequest req{r.image, start_context(scene), 1, 0};
  RemotePolicy slow(stub_process("sleep", 1, 300), 4);
  CHECK_THROWS_CODE(slow.predict(req), ErrorCode::kBackendUnavailable);

  // The child exits on its first request; the respawned one does the same.
  RemotePolicy dying(stub_process("exit", 1), 4);
  CHECK_THROWS_CODE(dying.predict(req), ErrorCode::kBackendUnavailable);
  CHECK_THROWS_CODE(dying.predict(req), ErrorCode::kBackendUnavailable);

  SubprocessTransport missing({"/nonexistent/binary"}, 1000);
  CHECK_THROWS_CODE(missing.exchange("{}"), ErrorCode::kBackendUnavailable);
}

TEST_CASE("http transport against the stub server") {
  const int port = 20000 + static_cast<int>(::getpid() % 20000);
  const std::string port_s = std::to_string(port);
  std::vector<std::string> args{BYOVLA_STUB_SERVER, "--http", port_s};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = -1;
  REQUIRE(posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ) == 0);
  struct Reaper {
    pid_t pid;
    ~Reaper() {
      ::kill(pid, SIGTERM);
      ::waitpid(pid, nullptr, 0);
    }
  } reaper{pid};

  const testbed::SceneSpec scene = testbed::builtin_scene("standard");
  const auto r = testbed::render(scene);
  StubPolicy direct(scene, 3);
  const PredictRequest req{r.image, start_context(scene), 2, 9};
  RemotePolicy remote(
      std::make_shared<Client>("policy",
                               std::make_unique<HttpTransport>("http://127.0.0.1:" + port_s, 2000), 0),
      4);
  std::vector<ActionChunk> got;
  for (int attempt = 0; attempt < 50 && got.empty(); ++attempt) {
    try {
      got = remote.predict(req);
    } catch (const BackendUnavailable&) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }
  CHECK(got == direct.predict(req));

  HttpTransport nowhere("http://127.0.0.1:1", 300);
  CHECK_THROWS_CODE(nowhere.exchange("{}"), ErrorCode::kBackendUnavailable);
}
