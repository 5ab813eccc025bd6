// SPDX-License-Identifier: Apache-2.0
#include "vlab/net/ws_server.hpp"

#include "vlab/common/error.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <mutex>
#include <thread>
#include <vector>

namespace vlab {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Session : public std::enable_shared_from_this<Session> {
public:
    Session(tcp::socket socket, Hub &hub, const WsServerOptions &options)
        : ws_(std::move(socket)), hub_(hub), options_(options)
    {
    }

    void run()
    {
        http::async_read(ws_.next_layer(), buffer_, request_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
    }

    void send(std::string text)
    {
        asio::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
            if (self->closing_)
                return;
            self->queue_.push_back(std::move(text));
            if (self->queue_.size() == 1)
                self->write_next();
        });
    }

    void close()
    {
        asio::post(ws_.get_executor(), [self = shared_from_this()] {
            if (self->closing_)
                return;
            self->closing_ = true;
            if (!self->queue_.empty())
                return; // closes after the pending write
            self->do_close();
        });
    }

private:
    class Link final : public Connection {
    public:
        explicit Link(std::weak_ptr<Session> session) : session_(std::move(session)) {}
        void send(std::string text) override
        {
            if (auto s = session_.lock())
                s->send(std::move(text));
        }
        void close() override
        {
            if (auto s = session_.lock())
                s->close();
        }

    private:
        std::weak_ptr<Session> session_;
    };

    void on_request(beast::error_code ec)
    {
        if (ec)
            return;
        auto target = std::string(request_.target());
        if (auto q = target.find('?'); q != std::string::npos)
            target.resize(q);
        if (target != options_.path || !websocket::is_upgrade(request_)) {
            auto res = std::make_shared<http::response<http::string_body>>(
                target == options_.path ? http::status::upgrade_required : http::status::not_found, request_.version());
            res->set(http::field::content_type, "text/plain");
            res->body() = target == options_.path ? "websocket upgrade required\n" : "not found\n";
            res->prepare_payload();
            res->keep_alive(false);
            http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
                beast::error_code ignored;
                self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_send, ignored);
            });
            return;
        }
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.read_message_max(options_.max_message_bytes);
        ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
    }

    void on_accept(beast::error_code ec)
    {
        if (ec)
            return;
        ws_.text(true);
        id_ = hub_.attach(std::make_shared<Link>(weak_from_this()));
        attached_ = true;
        read_next();
    }

    void read_next()
    {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec)
    {
        if (ec) {
            finish();
            return;
        }
        auto text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        hub_.receive(id_, text);
        read_next();
    }

    void write_next()
    {
        ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->queue_.pop_front();
            if (ec) {
                self->queue_.clear();
                self->finish();
                return;
            }
            if (!self->queue_.empty())
                self->write_next();
            else if (self->closing_)
                self->do_close();
        });
    }

    void do_close()
    {
        ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) { self->finish(); });
    }

    void finish()
    {
        closing_ = true;
        if (attached_) {
            attached_ = false;
            hub_.detach(id_);
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    Hub &hub_;
    const WsServerOptions &options_;
    std::deque<std::string> queue_;
    Hub::ConnectionId id_ = 0;
    bool attached_ = false;
    bool closing_ = false;
};

} // namespace

struct WsServer::Impl {
    Hub &hub;
    WsServerOptions options;
    asio::io_context ioc;
    tcp::acceptor acceptor{ioc};
    std::vector<std::thread> threads;
    std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
    std::uint16_t port = 0;
    bool running = false;

    Impl(Hub &h, WsServerOptions o) : hub(h), options(std::move(o)) {}

    void accept()
    {
        acceptor.async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec == asio::error::operation_aborted || !acceptor.is_open())
                return;
            if (!ec)
                std::make_shared<Session>(std::move(socket), hub, options)->run();
            accept();
        });
    }
};

WsServer::WsServer(Hub &hub, WsServerOptions options) : impl_(std::make_unique<Impl>(hub, std::move(options))) {}

WsServer::~WsServer()
{
    stop();
}

void WsServer::start()
{
    auto &i = *impl_;
    if (i.running)
        return;
    beast::error_code ec;
    auto address = asio::ip::make_address(i.options.address, ec);
    if (ec)
        fail(Errc::invalid_argument, "bad listen address '" + i.options.address + "'");
    tcp::endpoint endpoint(address, i.options.port);
    i.acceptor.open(endpoint.protocol(), ec);
    if (!ec)
        i.acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec)
        i.acceptor.bind(endpoint, ec);
    if (!ec)
        i.acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
        beast::error_code ignored;
        i.acceptor.close(ignored);
        fail(Errc::io_error, "cannot listen on " + i.options.address + ":" + std::to_string(i.options.port) + ": " +
                                 ec.message());
    }
    i.port = i.acceptor.local_endpoint().port();
    i.running = true;
    i.work.emplace(i.ioc.get_executor());
    i.accept();
    for (std::size_t n = 0; n < std::max<std::size_t>(1, i.options.threads); ++n)
        i.threads.emplace_back([&i] { i.ioc.run(); });
}

void WsServer::stop()
{
    auto &i = *impl_;
    if (!i.running)
        return;
    i.running = false;
    asio::post(i.ioc, [&i] {
        beast::error_code ignored;
        i.acceptor.close(ignored);
    });
    i.work.reset();
    i.ioc.stop();
    for (auto &t : i.threads)
        t.join();
    i.threads.clear();
}

std::uint16_t WsServer::port() const
{
    return impl_->port;
}

} // namespace vlab
