#pragma once

#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fourshape/image.hpp"
#include "fourshape/model.hpp"

namespace fourshape {

// Wire protocol between the optimizer and an external model host, spoken
// over the child process's stdin/stdout as length-prefixed frames:
//
//   frame := u32le byte_length | JSON header line ('\n'-terminated)
//            | raw little-endian float32 payload
//
// byte_length covers the header line and the payload. The session starts
// with a {"op":"hello","version":1} handshake that the host must answer
// with the same version. Requests are strictly one in flight:
//
//   {"op":"forward_backward","mode":"classify","h":H,"w":W,"ch":C,
//    "target":INT}                       + image payload (H*W*C floats)
//   {"op":"forward_backward","mode":"detect","h":H,"w":W,"ch":C,
//    "boxes":[[cx,cy,w,h],...]}          + image payload
//   {"op":"echo","h":H,"w":W,"ch":C}     + arbitrary payload
//
// Responses carry {"loss":FLOAT,"scores":[...],"grad_shape":[H,W,C]} and
// the gradient payload ("echo" returns the request payload unchanged;
// detect responses may add "clamped":true).
namespace wire {

constexpr int kProtocolVersion = 1;

struct Frame {
  nlohmann::json header;
  std::vector<float> payload;
};

// Blocking stdio framing, used by adapter host processes.
std::optional<Frame> read_frame(std::FILE* in);  // nullopt on clean EOF
void write_frame(std::FILE* out, const Frame& frame);

}  // namespace wire

// Spawns the adapter command and performs the version handshake; requests
// are sent one at a time with a deadline. Distinct failures raise distinct
// error codes: adapter_handshake, adapter_timeout, adapter_transport,
// shape_mismatch, adapter_payload.
class AdapterClient {
public:
  AdapterClient(std::vector<std::string> command, int timeout_ms);
  ~AdapterClient();

  AdapterClient(const AdapterClient&) = delete;
  AdapterClient& operator=(const AdapterClient&) = delete;

  ClassifyResult classify(const NaturalImage& image, int target);
  DetectResult detect(const NaturalImage& image, const std::vector<BoundingBox>& boxes);

  // Sends the image payload through an "echo" request and returns the
  // floats that came back.
  std::vector<float> echo(const NaturalImage& image);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Model> make_adapter_model(const ModelBinding& binding);

}  // namespace fourshape
