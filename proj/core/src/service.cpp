#include "bovw/service.hpp"

#include <sys/socket.h>

#include <atomic>
#include <charconv>
#include <condition_variable>
#include <deque>
#include <list>
#include <mutex>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "bovw/errors.hpp"
#include "bovw/png_io.hpp"

namespace bovw {

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;
using Bytes = std::shared_ptr<const std::vector<std::uint8_t>>;

std::int64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch()).count();
}

// One frame image (may be null for error results) and its JSON result.
struct Outgoing {
    Bytes frame;
    Bytes result;
};

struct Subscriber {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<Outgoing> queue;
    bool closed = false;
    std::atomic<std::int64_t> write_started_ns{0};
    int fd = -1;
};

struct Connection {
    std::thread thread;
    int fd = -1;
    std::atomic<bool> done{false};
};

using Response = http::response<http::string_body>;

Response make_response(http::status status, unsigned version, std::string body,
                       const char* content_type = "application/json") {
    Response res{status, version};
    res.set(http::field::server, "bovw");
    res.set(http::field::access_control_allow_origin, "*");
    if (!body.empty()) res.set(http::field::content_type, content_type);
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
}

std::string error_body(const std::string& reason) { return nlohmann::json{{"error", reason}}.dump(); }

} // namespace

void parse_bind(const std::string& bind, ServiceOptions& options) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0) throw PreconditionError("bind address must be ADDR:PORT, got '" + bind + "'");
    unsigned port = 0;
    const char* first = bind.data() + colon + 1;
    const char* last = bind.data() + bind.size();
    const auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port > 65535) throw PreconditionError("bad port in '" + bind + "'");
    options.address = bind.substr(0, colon);
    options.port = static_cast<unsigned short>(port);
}

std::vector<std::uint8_t> encode_frame_message(std::int64_t frame_index, std::span<const std::uint8_t> png) {
    std::vector<std::uint8_t> out(8 + png.size());
    const auto v = static_cast<std::uint64_t>(frame_index);
    for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
    std::copy(png.begin(), png.end(), out.begin() + 8);
    return out;
}

FrameMessage decode_frame_message(std::span<const std::uint8_t> message) {
    if (message.size() < 8) throw FormatError("frame message shorter than its 8-byte index prefix");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(message[static_cast<std::size_t>(i)]) << (8 * i);
    return {static_cast<std::int64_t>(v), message.subspan(8)};
}

struct Service::Impl {
    Impl(Pipeline& p, ServiceOptions o) : pipeline(p), options(std::move(o)), acceptor(ioc) {}

    Pipeline& pipeline;
    ServiceOptions options;
    net::io_context ioc;
    tcp::acceptor acceptor;
    std::thread accept_thread;
    std::thread broadcaster;
    std::atomic<bool> started{false};
    std::atomic<bool> stopping{false};

    std::mutex connections_mutex;
    std::list<std::shared_ptr<Connection>> connections;

    std::mutex subscribers_mutex;
    std::vector<std::shared_ptr<Subscriber>> subscribers;
    std::atomic<std::size_t> subscriber_count{0};
    std::atomic<std::uint64_t> stalled{0};

    std::mutex publish_mutex;
    std::condition_variable publish_cv;
    std::optional<FrameResult> pending_result;
    std::optional<RgbFrame> pending_frame;

    void accept_loop();
    void handle(tcp::socket socket);
    void stream(tcp::socket socket, const http::request<http::string_body>& req);
    Response route(const http::request<http::string_body>& req);
    void broadcast_loop();
    void check_stalls();
};

Response Service::Impl::route(const http::request<http::string_body>& req) {
    const auto target = std::string(req.target());
    const auto version = req.version();
    if (req.method() == http::verb::options) {
        auto res = make_response(http::status::no_content, version, "");
        res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
        res.set(http::field::access_control_allow_headers, "Content-Type");
        return res;
    }
    if (target == "/health") {
        if (req.method() != http::verb::get) return make_response(http::status::method_not_allowed, version, error_body("use GET"));
        const auto latest = pipeline.latest_result();
        nlohmann::json j{{"status", "ok"},
                         {"mode", to_string(pipeline.config().mode)},
                         {"subscribers", subscriber_count.load()},
                         {"latest_frame", latest ? nlohmann::json(latest->frame_index) : nlohmann::json(nullptr)}};
        return make_response(http::status::ok, version, j.dump());
    }
    if (target == "/result") {
        if (req.method() != http::verb::get) return make_response(http::status::method_not_allowed, version, error_body("use GET"));
        const auto latest = pipeline.latest_result();
        if (!latest) return make_response(http::status::no_content, version, "");
        return make_response(http::status::ok, version, frame_result_to_json(*latest));
    }
    if (target == "/control") {
        if (req.method() != http::verb::post) return make_response(http::status::method_not_allowed, version, error_body("use POST"));
        try {
            const ControlCommand applied = pipeline.submit(parse_control(req.body()));
            return make_response(http::status::ok, version, control_to_json(applied));
        } catch (const FormatError& e) {
            return make_response(http::status::bad_request, version, error_body(e.what()));
        } catch (const PreconditionError& e) {
            return make_response(http::status::bad_request, version, error_body(e.what()));
        } catch (const ConfigError& e) {
            return make_response(http::status::bad_request, version, error_body(e.what()));
        }
    }
    return make_response(http::status::not_found, version, error_body("no such endpoint: " + target));
}

void Service::Impl::handle(tcp::socket socket) {
    beast::flat_buffer buffer;
    beast::error_code ec;
    for (;;) {
        http::request<http::string_body> req;
        http::read(socket, buffer, req, ec);
        if (ec) break;
        if (websocket::is_upgrade(req)) {
            if (req.target() == "/stream") {
                stream(std::move(socket), req);
                return;
            }
            http::write(socket, make_response(http::status::not_found, req.version(), error_body("no such stream")), ec);
            break;
        }
        auto res = route(req);
        res.keep_alive(req.keep_alive());
        http::write(socket, res, ec);
        if (ec || !req.keep_alive()) break;
    }
    socket.shutdown(tcp::socket::shutdown_both, ec);
}

void Service::Impl::stream(tcp::socket socket, const http::request<http::string_body>& req) {
    websocket::stream<tcp::socket> ws(std::move(socket));
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;

    auto sub = std::make_shared<Subscriber>();
    sub->fd = ws.next_layer().native_handle();
    {
        std::lock_guard lk(subscribers_mutex);
        subscribers.push_back(sub);
        subscriber_count = subscribers.size();
    }

    auto send = [&](const Bytes& bytes, bool binary) {
        sub->write_started_ns = now_ns();
        ws.binary(binary);
        ws.write(net::buffer(*bytes), ec);
        sub->write_started_ns = 0;
        return !ec;
    };
    for (;;) {
        Outgoing next;
        {
            std::unique_lock lk(sub->mutex);
            sub->cv.wait(lk, [&] { return !sub->queue.empty() || sub->closed; });
            if (sub->closed) break;
            next = std::move(sub->queue.front());
            sub->queue.pop_front();
        }
        if (next.frame && !send(next.frame, true)) break;
        if (!send(next.result, false)) break;
    }

    {
        std::lock_guard lk(subscribers_mutex);
        std::erase(subscribers, sub);
        subscriber_count = subscribers.size();
    }
    if (!ec) ws.close(websocket::close_code::going_away, ec);
}

void Service::Impl::accept_loop() {
    while (!stopping) {
        tcp::socket socket(ioc);
        beast::error_code ec;
        acceptor.accept(socket, ec);
        if (ec) {
            if (stopping) break;
            continue;
        }
        auto conn = std::make_shared<Connection>();
        conn->fd = socket.native_handle();
        std::lock_guard lk(connections_mutex);
        for (auto it = connections.begin(); it != connections.end();) {
            if ((*it)->done) {
                (*it)->thread.join();
                it = connections.erase(it);
            } else {
                ++it;
            }
        }
        conn->thread = std::thread([this, conn, s = std::move(socket)]() mutable {
            handle(std::move(s));
            conn->done = true;
        });
        connections.push_back(conn);
    }
}

void Service::Impl::check_stalls() {
    const auto limit = std::chrono::duration_cast<std::chrono::nanoseconds>(options.stall_timeout).count();
    const auto now = now_ns();
    std::lock_guard lk(subscribers_mutex);
    for (const auto& sub : subscribers) {
        const auto started = sub->write_started_ns.load();
        if (started == 0 || now - started <= limit) continue;
        std::lock_guard slk(sub->mutex);
        if (sub->closed) continue;
        sub->closed = true;
        ++stalled;
        // Unblocks the writer thread stuck in send().
        ::shutdown(sub->fd, SHUT_RDWR);
        sub->cv.notify_all();
    }
}

void Service::Impl::broadcast_loop() {
    while (!stopping) {
        std::optional<FrameResult> result;
        std::optional<RgbFrame> frame;
        {
            std::unique_lock lk(publish_mutex);
            publish_cv.wait_for(lk, std::chrono::milliseconds(100),
                                [&] { return pending_result.has_value() || stopping.load(); });
            result = std::move(pending_result);
            frame = std::move(pending_frame);
            pending_result.reset();
            pending_frame.reset();
        }
        check_stalls();
        if (!result || subscriber_count == 0) continue;

        Outgoing out;
        if (frame) out.frame = std::make_shared<const std::vector<std::uint8_t>>(
                       encode_frame_message(result->frame_index, encode_png(*frame, options.png_compression)));
        const auto json = frame_result_to_json(*result);
        out.result = std::make_shared<const std::vector<std::uint8_t>>(json.begin(), json.end());

        std::lock_guard lk(subscribers_mutex);
        for (const auto& sub : subscribers) {
            std::lock_guard slk(sub->mutex);
            if (sub->closed) continue;
            if (sub->queue.size() >= options.queue_pairs) sub->queue.pop_front();
            sub->queue.push_back(out);
            sub->cv.notify_one();
        }
    }
}

Service::Service(Pipeline& pipeline, ServiceOptions options)
    : impl_(std::make_unique<Impl>(pipeline, std::move(options))) {
    const auto where = impl_->options.address + ":" + std::to_string(impl_->options.port);
    try {
        const tcp::endpoint endpoint(net::ip::make_address(impl_->options.address), impl_->options.port);
        impl_->acceptor.open(endpoint.protocol());
        impl_->acceptor.set_option(net::socket_base::reuse_address(true));
        impl_->acceptor.bind(endpoint);
        impl_->acceptor.listen();
    } catch (const boost::system::system_error& e) {
        throw IoError(where, std::string("cannot bind: ") + e.what());
    }
    if (impl_->options.queue_pairs == 0) throw PreconditionError("subscriber queue must hold at least one frame");
}

Service::~Service() { stop(); }

unsigned short Service::port() const noexcept {
    beast::error_code ec;
    const auto ep = impl_->acceptor.local_endpoint(ec);
    return ec ? 0 : ep.port();
}

void Service::start() {
    if (impl_->started.exchange(true)) return;
    impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
    impl_->broadcaster = std::thread([this] { impl_->broadcast_loop(); });
}

void Service::stop() {
    auto& d = *impl_;
    if (d.stopping.exchange(true)) return;
    beast::error_code ec;
    if (d.acceptor.is_open()) ::shutdown(d.acceptor.native_handle(), SHUT_RDWR);
    if (d.accept_thread.joinable()) d.accept_thread.join();
    d.acceptor.close(ec);
    d.publish_cv.notify_all();
    if (d.broadcaster.joinable()) d.broadcaster.join();
    {
        std::lock_guard lk(d.subscribers_mutex);
        for (const auto& sub : d.subscribers) {
            std::lock_guard slk(sub->mutex);
            sub->closed = true;
            sub->cv.notify_all();
        }
    }
    std::lock_guard lk(d.connections_mutex);
    for (const auto& conn : d.connections) {
        if (!conn->done) ::shutdown(conn->fd, SHUT_RDWR);
    }
    for (const auto& conn : d.connections) conn->thread.join();
    d.connections.clear();
}

void Service::publish(const FrameResult& result, const RgbFrame* annotated) {
    auto& d = *impl_;
    if (d.subscriber_count == 0 || d.stopping) return;
    std::lock_guard lk(d.publish_mutex);
    d.pending_result = result;
    if (annotated) {
        d.pending_frame = *annotated;
    } else {
        d.pending_frame.reset();
    }
    d.publish_cv.notify_one();
}

std::size_t Service::subscriber_count() const { return impl_->subscriber_count; }

std::uint64_t Service::stalled_disconnects() const { return impl_->stalled; }

} // namespace bovw
