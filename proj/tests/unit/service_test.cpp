#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <json.hpp>
#include <random>
#include <thread>

#include "bovw/errors.hpp"
#include "bovw/png_io.hpp"
#include "bovw/service.hpp"
#include "fixtures.hpp"

using namespace bovw;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

struct Reply {
    int status = 0;
    std::string body;
    std::string allow_origin;
};

Reply request(unsigned short port, http::verb verb, const std::string& target, const std::string& body = "") {
    net::io_context ioc;
    tcp::socket socket(ioc);
    socket.connect({net::ip::make_address("127.0.0.1"), port});
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "127.0.0.1");
    if (!body.empty()) {
        req.set(http::field::content_type, "application/json");
        req.body() = body;
        req.prepare_payload();
    }
    http::write(socket, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(socket, buffer, res);
    beast::error_code ec;
    socket.shutdown(tcp::socket::shutdown_both, ec);
    return {static_cast<int>(res.result_int()), res.body(), std::string(res[http::field::access_control_allow_origin])};
}

std::unique_ptr<websocket::stream<tcp::socket>> subscribe(net::io_context& ioc, unsigned short port,
                                                          int receive_buffer = 0) {
    auto ws = std::make_unique<websocket::stream<tcp::socket>>(ioc);
    auto& sock = ws->next_layer();
    sock.open(tcp::v4());
    if (receive_buffer > 0) sock.set_option(net::socket_base::receive_buffer_size(receive_buffer));
    sock.connect({net::ip::make_address("127.0.0.1"), port});
    ws->handshake("127.0.0.1", "/stream");
    return ws;
}

bool wait_until(const std::function<bool()>& pred, std::chrono::milliseconds limit = std::chrono::seconds(5)) {
    const auto end = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < end) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return pred();
}

FrameResult result_for(std::int64_t index) {
    FrameResult r;
    r.frame_index = index;
    r.classes = {"A", "B", "C3"};
    r.probabilities = {0.011, 0.989, 0.0};
    r.label = "B";
    r.roi = {20, 20, 60, 60};
    return r;
}

RgbFrame tiny_frame(int w, int h, std::uint8_t fill) {
    RgbFrame f;
    f.width = w;
    f.height = h;
    f.data.assign(static_cast<std::size_t>(w) * h * 3, fill);
    return f;
}

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        pipeline = std::make_unique<Pipeline>(fixture::small_model_set(), PipelineConfig{});
        pipeline->set_frame_size(640, 480);
        ServiceOptions o;
        o.port = 0;
        service = std::make_unique<Service>(*pipeline, o);
        service->start();
        port = service->port();
    }
    void TearDown() override { service->stop(); }

    std::unique_ptr<Pipeline> pipeline;
    std::unique_ptr<Service> service;
    unsigned short port = 0;
};

} // namespace

TEST(FrameMessage, RoundTrip) {
    const std::vector<std::uint8_t> png{1, 2, 3};
    const auto msg = encode_frame_message(0x0102030405LL, png);
    ASSERT_EQ(msg.size(), 11u);
    EXPECT_EQ(msg[0], 0x05);
    EXPECT_EQ(msg[4], 0x01);
    EXPECT_EQ(msg[7], 0x00);
    const auto back = decode_frame_message(msg);
    EXPECT_EQ(back.frame_index, 0x0102030405LL);
    EXPECT_EQ(std::vector<std::uint8_t>(back.png.begin(), back.png.end()), png);
    const std::vector<std::uint8_t> short_msg{1, 2, 3};
    EXPECT_THROW(decode_frame_message(short_msg), FormatError);
}

TEST(ParseBind, Forms) {
    ServiceOptions o;
    parse_bind("0.0.0.0:9001", o);
    EXPECT_EQ(o.address, "0.0.0.0");
    EXPECT_EQ(o.port, 9001);
    EXPECT_THROW(parse_bind("localhost", o), PreconditionError);
    EXPECT_THROW(parse_bind("1.2.3.4:99999", o), PreconditionError);
}

TEST_F(ServiceTest, HealthAndEmptyResult) {
    const auto health = request(port, http::verb::get, "/health");
    EXPECT_EQ(health.status, 200);
    const auto j = json::parse(health.body);
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["mode"], "three");
    EXPECT_TRUE(j["latest_frame"].is_null());
    EXPECT_EQ(health.allow_origin, "*");
    EXPECT_EQ(request(port, http::verb::get, "/result").status, 204);
    EXPECT_EQ(request(port, http::verb::get, "/nowhere").status, 404);
    EXPECT_EQ(request(port, http::verb::post, "/health", "{}").status, 405);
    EXPECT_EQ(request(port, http::verb::options, "/control").status, 204);
}

TEST_F(ServiceTest, ControlEchoesClampedCommand) {
    const auto ok = request(port, http::verb::post, "/control", R"({"kind":"set_roi","x":600,"y":10,"w":200,"h":200})");
    ASSERT_EQ(ok.status, 200) << ok.body;
    const auto j = json::parse(ok.body);
    EXPECT_EQ(j["kind"], "set_roi");
    EXPECT_EQ(j["x"], 440);
    EXPECT_EQ(j["y"], 10);
    EXPECT_EQ(j["w"], 200);

    const auto mode = request(port, http::verb::post, "/control", R"({"kind":"set_mode","mode":"two"})");
    EXPECT_EQ(mode.status, 200);

    for (const char* bad : {"not json", R"({"kind":"explode"})", R"({"kind":"set_roi","x":1})",
                            R"({"kind":"set_mode","mode":"four"})", R"({"kind":"set_smoothing","alpha":1})"}) {
        const auto r = request(port, http::verb::post, "/control", bad);
        EXPECT_EQ(r.status, 400) << bad;
        EXPECT_TRUE(json::parse(r.body).contains("error")) << r.body;
    }
}

TEST_F(ServiceTest, ResultAfterFrame) {
    SyntheticSource src(1, TextureClass::B, 320, 240, 30, 3);
    PipelineConfig cfg;
    cfg.drop_policy = DropPolicy::process_all;
    Pipeline p(fixture::small_model_set(), cfg);
    ServiceOptions o;
    o.port = 0;
    Service s(p, o);
    s.start();
    p.run(src, {});
    const auto r = request(s.port(), http::verb::get, "/result");
    ASSERT_EQ(r.status, 200);
    const auto back = frame_result_from_json(r.body);
    EXPECT_EQ(back.frame_index, 2);
    const auto health = json::parse(request(s.port(), http::verb::get, "/health").body);
    EXPECT_EQ(health["latest_frame"], 2);
    s.stop();
}

TEST_F(ServiceTest, StreamPairsFrameAndResultForEverySubscriber) {
    net::io_context ioc;
    auto a = subscribe(ioc, port);
    auto b = subscribe(ioc, port);
    ASSERT_TRUE(wait_until([&] { return service->subscriber_count() == 2; }));

    const auto frame = tiny_frame(64, 48, 77);
    std::thread pub([&] {
        for (int i = 0; i < 3; ++i) {
            service->publish(result_for(10 + i), &frame);
            std::this_thread::sleep_for(std::chrono::milliseconds(150));
        }
    });
    for (auto* ws : {a.get(), b.get()}) {
        std::int64_t last = -1;
        for (int k = 0; k < 3; ++k) {
            beast::flat_buffer buf;
            ws->read(buf);
            ASSERT_TRUE(ws->got_binary());
            const auto bytes = beast::buffers_to_string(buf.data());
            const std::vector<std::uint8_t> raw(bytes.begin(), bytes.end());
            const auto msg = decode_frame_message(raw);
            const auto image = decode_png(msg.png);
            EXPECT_EQ(image.width, 64);
            EXPECT_EQ(image.data, frame.data);

            beast::flat_buffer text;
            ws->read(text);
            ASSERT_TRUE(ws->got_text());
            const auto result = frame_result_from_json(beast::buffers_to_string(text.data()));
            EXPECT_EQ(result.frame_index, msg.frame_index);
            EXPECT_GT(result.frame_index, last);
            last = result.frame_index;
        }
    }
    pub.join();
    const auto health = json::parse(request(port, http::verb::get, "/health").body);
    EXPECT_EQ(health["subscribers"], 2);
}

TEST_F(ServiceTest, StalledSubscriberIsDisconnected) {
    service->stop();
    ServiceOptions o;
    o.port = 0;
    o.stall_timeout = std::chrono::milliseconds(300);
    Service s(*pipeline, o);
    s.start();

    net::io_context ioc;
    auto stalled = subscribe(ioc, s.port(), 4096);
    ASSERT_TRUE(wait_until([&] { return s.subscriber_count() == 1; }));

    // Incompressible frames fill the socket buffers quickly.
    RgbFrame noise = tiny_frame(640, 480, 0);
    std::mt19937 rng(1);
    for (auto& v : noise.data) v = static_cast<std::uint8_t>(rng());
    std::int64_t i = 0;
    const bool gone = wait_until(
        [&] {
            s.publish(result_for(i++), &noise);
            return s.stalled_disconnects() >= 1;
        },
        std::chrono::seconds(20));
    EXPECT_TRUE(gone);
    EXPECT_TRUE(wait_until([&] { return s.subscriber_count() == 0; }));

    // The service keeps answering after dropping the client.
    EXPECT_EQ(request(s.port(), http::verb::get, "/health").status, 200);
    s.stop();
}

TEST(ServiceBind, PortInUseIsIoError) {
    Pipeline p(fixture::small_model_set(), PipelineConfig{});
    ServiceOptions o;
    o.port = 0;
    Service first(p, o);
    o.port = first.port();
    EXPECT_THROW(Service(p, o), IoError);
}
