#include "fourshape/adapter.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>

namespace fourshape {

namespace wire {

namespace {

std::uint32_t to_u32le_bits(float v) { return std::bit_cast<std::uint32_t>(v); }

}  // namespace

std::optional<Frame> read_frame(std::FILE* in) {
  std::uint8_t len_bytes[4];
  const std::size_t got = std::fread(len_bytes, 1, 4, in);
  if (got == 0 && std::feof(in)) return std::nullopt;
  if (got != 4) raise(ErrorCode::adapter_transport, "truncated frame length");
  const std::uint32_t len = static_cast<std::uint32_t>(len_bytes[0]) |
                            (static_cast<std::uint32_t>(len_bytes[1]) << 8) |
                            (static_cast<std::uint32_t>(len_bytes[2]) << 16) |
                            (static_cast<std::uint32_t>(len_bytes[3]) << 24);
  std::vector<std::uint8_t> body(len);
  if (len > 0 && std::fread(body.data(), 1, len, in) != len) {
    raise(ErrorCode::adapter_transport, "truncated frame body");
  }
  const auto newline = std::find(body.begin(), body.end(), static_cast<std::uint8_t>('\n'));
  if (newline == body.end()) {
    raise(ErrorCode::adapter_transport, "frame header line is missing its terminator");
  }
  Frame frame;
  try {
    frame.header = nlohmann::json::parse(std::string(body.begin(), newline));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::adapter_transport, std::string("frame header is not valid JSON: ") + e.what());
  }
  const std::size_t payload_bytes = static_cast<std::size_t>(body.end() - newline) - 1;
  if (payload_bytes % 4 != 0) {
    raise(ErrorCode::adapter_transport, "frame payload is not a whole number of float32s");
  }
  frame.payload.resize(payload_bytes / 4);
  const std::uint8_t* p = &*newline + 1;
  for (std::size_t i = 0; i < frame.payload.size(); ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[4 * i]) |
                         (static_cast<std::uint32_t>(p[4 * i + 1]) << 8) |
                         (static_cast<std::uint32_t>(p[4 * i + 2]) << 16) |
                         (static_cast<std::uint32_t>(p[4 * i + 3]) << 24);
    frame.payload[i] = std::bit_cast<float>(bits);
  }
  return frame;
}

void write_frame(std::FILE* out, const Frame& frame) {
  const std::string header = frame.header.dump() + "\n";
  const std::uint32_t len = static_cast<std::uint32_t>(header.size() + 4 * frame.payload.size());
  std::uint8_t len_bytes[4] = {static_cast<std::uint8_t>(len & 0xff),
                               static_cast<std::uint8_t>((len >> 8) & 0xff),
                               static_cast<std::uint8_t>((len >> 16) & 0xff),
                               static_cast<std::uint8_t>((len >> 24) & 0xff)};
  if (std::fwrite(len_bytes, 1, 4, out) != 4 ||
      std::fwrite(header.data(), 1, header.size(), out) != header.size()) {
    raise(ErrorCode::adapter_transport, "failed to write frame header");
  }
  for (float v : frame.payload) {
    const std::uint32_t bits = to_u32le_bits(v);
    const std::uint8_t bytes[4] = {static_cast<std::uint8_t>(bits & 0xff),
                                   static_cast<std::uint8_t>((bits >> 8) & 0xff),
                                   static_cast<std::uint8_t>((bits >> 16) & 0xff),
                                   static_cast<std::uint8_t>((bits >> 24) & 0xff)};
    if (std::fwrite(bytes, 1, 4, out) != 4) {
      raise(ErrorCode::adapter_transport, "failed to write frame payload");
    }
  }
  if (std::fflush(out) != 0) {
    raise(ErrorCode::adapter_transport, "failed to flush frame");
  }
}

}  // namespace wire

namespace {

using Clock = std::chrono::steady_clock;

struct Deadline {
  Clock::time_point end;

  static Deadline in_ms(int ms) { return {Clock::now() + std::chrono::milliseconds(ms)}; }

  int remaining_ms() const {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(end - Clock::now());
    return static_cast<int>(std::max<long long>(0, left.count()));
  }
  bool expired() const { return Clock::now() >= end; }
};

void ignore_sigpipe_once() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

}  // namespace

struct AdapterClient::Impl {
  pid_t pid = -1;
  int to_child = -1;    // our write end of the child's stdin
  int from_child = -1;  // our read end of the child's stdout
  int timeout_ms = 10000;
  std::string name;
  bool broken = false;

  void spawn(const std::vector<std::string>& command) {
    if (command.empty()) {
      raise(ErrorCode::config, "adapter command line is empty");
    }
    name = command.front();
    int in_pipe[2], out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
      raise(ErrorCode::adapter_transport, "failed to create adapter pipes");
    }
    pid = ::fork();
    if (pid < 0) {
      raise(ErrorCode::adapter_transport, "failed to fork adapter process");
    }
    if (pid == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      ::close(out_pipe[1]);
      std::vector<char*> argv;
      argv.reserve(command.size() + 1);
      for (const std::string& arg : command) argv.push_back(const_cast<char*>(arg.c_str()));
      argv.push_back(nullptr);
      ::execvp(argv[0], argv.data());
      std::fprintf(stderr, "exec %s failed: %s\n", argv[0], std::strerror(errno));
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child = in_pipe[1];
    from_child = out_pipe[0];
  }

  void shutdown() {
    if (to_child >= 0) {
      ::close(to_child);
      to_child = -1;
    }
    if (from_child >= 0) {
      ::close(from_child);
      from_child = -1;
    }
    if (pid > 0) {
      // give the child a moment to exit on EOF, then force it
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid, nullptr, WNOHANG) == pid) {
          pid = -1;
          return;
        }
        ::usleep(10 * 1000);
      }
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      pid = -1;
    }
  }

  void write_all(const std::uint8_t* data, std::size_t size, const Deadline& deadline) {
    std::size_t sent = 0;
    while (sent < size) {
      struct pollfd pfd{to_child, POLLOUT, 0};
      const int ready = ::poll(&pfd, 1, deadline.remaining_ms());
      if (ready == 0) {
        broken = true;
        raise(ErrorCode::adapter_timeout, "adapter \"" + name + "\" did not accept a request in time");
      }
      if (ready < 0 || (pfd.revents & (POLLERR | POLLHUP))) {
        broken = true;
        raise(ErrorCode::adapter_transport, "adapter \"" + name + "\" closed its input");
      }
      const ssize_t n = ::write(to_child, data + sent, size - sent);
      if (n <= 0) {
        broken = true;
        raise(ErrorCode::adapter_transport,
              "write to adapter \"" + name + "\" failed: " + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  void read_all(std::uint8_t* data, std::size_t size, const Deadline& deadline) {
    std::size_t got = 0;
    while (got < size) {
      struct pollfd pfd{from_child, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, deadline.remaining_ms());
      if (ready == 0) {
        broken = true;
        raise(ErrorCode::adapter_timeout, "adapter \"" + name + "\" did not respond in time");
      }
      if (ready < 0) {
        broken = true;
        raise(ErrorCode::adapter_transport, "poll on adapter \"" + name + "\" failed");
      }
      const ssize_t n = ::read(from_child, data + got, size - got);
      if (n <= 0) {
        broken = true;
        raise(ErrorCode::adapter_transport, "adapter \"" + name + "\" exited mid-response");
      }
      got += static_cast<std::size_t>(n);
    }
  }

  void send_frame(const wire::Frame& frame, const Deadline& deadline) {
    const std::string header = frame.header.dump() + "\n";
    const std::uint32_t len =
        static_cast<std::uint32_t>(header.size() + 4 * frame.payload.size());
    std::vector<std::uint8_t> buffer;
    buffer.reserve(4 + len);
    buffer.push_back(static_cast<std::uint8_t>(len & 0xff));
    buffer.push_back(static_cast<std::uint8_t>((len >> 8) & 0xff));
    buffer.push_back(static_cast<std::uint8_t>((len >> 16) & 0xff));
    buffer.push_back(static_cast<std::uint8_t>((len >> 24) & 0xff));
    buffer.insert(buffer.end(), header.begin(), header.end());
    for (float v : frame.payload) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      buffer.push_back(static_cast<std::uint8_t>(bits & 0xff));
      buffer.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xff));
      buffer.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xff));
      buffer.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xff));
    }
    write_all(buffer.data(), buffer.size(), deadline);
  }

  wire::Frame receive_frame(const Deadline& deadline) {
    std::uint8_t len_bytes[4];
    read_all(len_bytes, 4, deadline);
    const std::uint32_t len = static_cast<std::uint32_t>(len_bytes[0]) |
                              (static_cast<std::uint32_t>(len_bytes[1]) << 8) |
                              (static_cast<std::uint32_t>(len_bytes[2]) << 16) |
                              (static_cast<std::uint32_t>(len_bytes[3]) << 24);
    if (len == 0 || len > (1u << 30)) {
      broken = true;
      raise(ErrorCode::adapter_transport, "adapter sent an implausible frame length");
    }
    std::vector<std::uint8_t> body(len);
    read_all(body.data(), len, deadline);

    const auto newline = std::find(body.begin(), body.end(), static_cast<std::uint8_t>('\n'));
    if (newline == body.end()) {
      broken = true;
      raise(ErrorCode::adapter_transport, "adapter frame is missing its header terminator");
    }
    wire::Frame frame;
    try {
      frame.header = nlohmann::json::parse(std::string(body.begin(), newline));
    } catch (const nlohmann::json::exception& e) {
      broken = true;
      raise(ErrorCode::adapter_transport,
            std::string("adapter frame header is not valid JSON: ") + e.what());
    }
    const std::size_t payload_bytes = static_cast<std::size_t>(body.end() - newline) - 1;
    if (payload_bytes % 4 != 0) {
      broken = true;
      raise(ErrorCode::adapter_transport, "adapter payload is not a whole number of float32s");
    }
    frame.payload.resize(payload_bytes / 4);
    const std::uint8_t* p = &*newline + 1;
    for (std::size_t i = 0; i < frame.payload.size(); ++i) {
      const std::uint32_t bits = static_cast<std::uint32_t>(p[4 * i]) |
                                 (static_cast<std::uint32_t>(p[4 * i + 1]) << 8) |
                                 (static_cast<std::uint32_t>(p[4 * i + 2]) << 16) |
                                 (static_cast<std::uint32_t>(p[4 * i + 3]) << 24);
      frame.payload[i] = std::bit_cast<float>(bits);
    }
    return frame;
  }

  wire::Frame roundtrip(const wire::Frame& request) {
    if (broken) {
      raise(ErrorCode::adapter_transport, "adapter channel is no longer usable");
    }
    const Deadline deadline = Deadline::in_ms(timeout_ms);
    send_frame(request, deadline);
    return receive_frame(deadline);
  }
};

AdapterClient::AdapterClient(std::vector<std::string> command, int timeout_ms)
    : impl_(std::make_unique<Impl>()) {
  ignore_sigpipe_once();
  impl_->timeout_ms = timeout_ms;
  impl_->spawn(command);

  wire::Frame hello;
  hello.header = {{"op", "hello"}, {"version", wire::kProtocolVersion}};
  wire::Frame reply;
  try {
    reply = impl_->roundtrip(hello);
  } catch (const Error& e) {
    impl_->shutdown();
    if (e.code() == ErrorCode::adapter_timeout) throw;
    raise(ErrorCode::adapter_handshake,
          std::string("adapter handshake failed: ") + e.what());
  }
  if (reply.header.value("op", "") != "hello" ||
      reply.header.value("version", -1) != wire::kProtocolVersion) {
    impl_->shutdown();
    raise(ErrorCode::adapter_handshake,
          "adapter answered the handshake with " + reply.header.dump() + ", expected version " +
              std::to_string(wire::kProtocolVersion));
  }
}

AdapterClient::~AdapterClient() {
  if (impl_) impl_->shutdown();
}

namespace {

std::vector<float> image_payload(const NaturalImage& image) {
  std::vector<float> payload(image.values.size());
  for (std::size_t i = 0; i < payload.size(); ++i) {
    payload[i] = static_cast<float>(image.values[i]);
  }
  return payload;
}

// shared response checks: grad_shape must echo the request dimensions and
// the payload must hold exactly that many finite floats
std::vector<double> take_gradient(const wire::Frame& reply, const NaturalImage& image) {
  const auto& header = reply.header;
  if (!header.contains("grad_shape") || !header["grad_shape"].is_array() ||
      header["grad_shape"].size() != 3) {
    raise(ErrorCode::shape_mismatch, "adapter response lacks a 3-entry grad_shape");
  }
  const int gh = header["grad_shape"][0].get<int>();
  const int gw = header["grad_shape"][1].get<int>();
  const int gc = header["grad_shape"][2].get<int>();
  if (gh != image.height || gw != image.width || gc != image.channels) {
    raise(ErrorCode::shape_mismatch,
          "adapter returned gradient shape " + std::to_string(gh) + "x" + std::to_string(gw) +
              "x" + std::to_string(gc) + ", expected " + std::to_string(image.height) + "x" +
              std::to_string(image.width) + "x" + std::to_string(image.channels));
  }
  if (reply.payload.size() != image.element_count()) {
    raise(ErrorCode::shape_mismatch,
          "adapter gradient payload holds " + std::to_string(reply.payload.size()) +
              " floats, expected " + std::to_string(image.element_count()));
  }
  std::vector<double> grad(reply.payload.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const float v = reply.payload[i];
    if (!std::isfinite(v)) {
      raise(ErrorCode::adapter_payload, "adapter gradient contains non-finite values");
    }
    grad[i] = v;
  }
  return grad;
}

double take_loss(const wire::Frame& reply) {
  if (!reply.header.contains("loss") || !reply.header["loss"].is_number()) {
    raise(ErrorCode::adapter_payload, "adapter response lacks a numeric loss");
  }
  const double loss = reply.header["loss"].get<double>();
  if (!std::isfinite(loss)) {
    raise(ErrorCode::adapter_payload, "adapter returned a non-finite loss");
  }
  return loss;
}

std::vector<double> take_scores(const wire::Frame& reply) {
  std::vector<double> scores;
  if (reply.header.contains("scores")) {
    for (const auto& s : reply.header["scores"]) {
      const double v = s.get<double>();
      if (!std::isfinite(v)) {
        raise(ErrorCode::adapter_payload, "adapter returned non-finite scores");
      }
      scores.push_back(v);
    }
  }
  return scores;
}

}  // namespace

ClassifyResult AdapterClient::classify(const NaturalImage& image, int target) {
  wire::Frame request;
  request.header = {{"op", "forward_backward"}, {"mode", "classify"},   {"h", image.height},
                    {"w", image.width},         {"ch", image.channels}, {"target", target}};
  request.payload = image_payload(image);
  const wire::Frame reply = impl_->roundtrip(request);

  ClassifyResult out;
  out.loss = take_loss(reply);
  out.probabilities = take_scores(reply);
  out.pixel_grad = take_gradient(reply, image);
  return out;
}

DetectResult AdapterClient::detect(const NaturalImage& image,
                                   const std::vector<BoundingBox>& boxes) {
  nlohmann::json box_list = nlohmann::json::array();
  for (const BoundingBox& b : boxes) box_list.push_back({b.cx, b.cy, b.w, b.h});
  wire::Frame request;
  request.header = {{"op", "forward_backward"}, {"mode", "detect"},     {"h", image.height},
                    {"w", image.width},         {"ch", image.channels}, {"boxes", box_list}};
  request.payload = image_payload(image);
  const wire::Frame reply = impl_->roundtrip(request);

  DetectResult out;
  out.loss = take_loss(reply);
  out.scores = take_scores(reply);
  out.pixel_grad = take_gradient(reply, image);
  out.clamped = reply.header.value("clamped", false);
  return out;
}

std::vector<float> AdapterClient::echo(const NaturalImage& image) {
  wire::Frame request;
  request.header = {
      {"op", "echo"}, {"h", image.height}, {"w", image.width}, {"ch", image.channels}};
  request.payload = image_payload(image);
  const wire::Frame reply = impl_->roundtrip(request);
  if (reply.payload.size() != request.payload.size()) {
    raise(ErrorCode::shape_mismatch, "echo reply has a different payload size");
  }
  return reply.payload;
}

namespace {

class AdapterModel final : public Model {
public:
  explicit AdapterModel(const ModelBinding& binding)
      : client_(binding.command, binding.timeout_ms) {}

  bool is_detector() const noexcept override { return false; }

  ClassifyResult classify(const NaturalImage& image, int target) override {
    return client_.classify(image, target);
  }

  DetectResult detect(const NaturalImage& image, const std::vector<BoundingBox>& boxes) override {
    return client_.detect(image, boxes);
  }

private:
  AdapterClient client_;
};

}  // namespace

std::unique_ptr<Model> make_adapter_model(const ModelBinding& binding) {
  return std::make_unique<AdapterModel>(binding);
}

}  // namespace fourshape
