#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bovw/pipeline.hpp"

namespace bovw {

struct ServiceOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8080;  // 0 picks a free port
    // Frame/result pairs buffered per subscriber; the oldest pair is dropped when full.
    std::size_t queue_pairs = 16;
    // A subscriber whose socket write blocks this long is disconnected.
    std::chrono::milliseconds stall_timeout{2000};
    int png_compression = 1;
};

// "127.0.0.1:8080" -> address and port. Throws PreconditionError.
void parse_bind(const std::string& bind, ServiceOptions& options);

// Binary WebSocket message: 8-byte little-endian frame_index, then PNG bytes.
std::vector<std::uint8_t> encode_frame_message(std::int64_t frame_index, std::span<const std::uint8_t> png);
struct FrameMessage {
    std::int64_t frame_index = 0;
    std::span<const std::uint8_t> png;
};
// Throws FormatError on messages shorter than the prefix.
FrameMessage decode_frame_message(std::span<const std::uint8_t> message);

// HTTP + WebSocket front end for a running pipeline:
//   GET /health, GET /result, POST /control, WebSocket /stream.
class Service {
public:
    // Binds immediately; throws IoError when the address cannot be bound.
    Service(Pipeline& pipeline, ServiceOptions options);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    unsigned short port() const noexcept;

    void start();
    void stop();

    // Pipeline sink side. Never blocks on subscribers; a no-op when nobody listens.
    void publish(const FrameResult& result, const RgbFrame* annotated);

    std::size_t subscriber_count() const;
    std::uint64_t stalled_disconnects() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace bovw
