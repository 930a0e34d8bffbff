#include "cobridge/ingest.hpp"

#include "cobridge/error.hpp"

#include <chrono>

namespace cobridge {

namespace {

constexpr auto kPollSlice = Duration::from_millis(20);
constexpr std::size_t kBatch = 256;

}  // namespace

RecordDecoder default_decoder() {
    return [](const Envelope& env) { return decode_record(env.payload); };
}

std::size_t fill_unthreaded(IncomingQueue& q, Subscription& sub, const std::function<bool(const IncomingQueue&)>& stop,
                            Duration deadline, const RecordDecoder& decode) {
    using clock = std::chrono::steady_clock;
    const auto until = clock::now() + deadline.chrono();
    std::size_t ingested = 0;
    while (!stop(q)) {
        const auto now = clock::now();
        const auto left = until > now ? std::chrono::duration_cast<std::chrono::nanoseconds>(until - now)
                                      : std::chrono::nanoseconds::zero();
        std::vector<Envelope> got;
        try {
            got = sub.poll(1, Duration(left.count()));
        } catch (const TransportError& e) {
            throw TransportError(std::string("ingest from '") + sub.routing_key() + "': " + e.what());
        }
        if (got.empty()) break;
        try {
            q.offer(decode(got.front()));
        } catch (const DecodeError& e) {
            throw DecodeError(std::string("record from '") + sub.routing_key() + "': " + e.what(), e.offset());
        }
        ++ingested;
    }
    return ingested;
}

ConsumerThread::ConsumerThread(IncomingQueue& q, Subscription& sub, RecordDecoder decode)
    : queue_(q), sub_(sub), decode_(std::move(decode)) {}

ConsumerThread::~ConsumerThread() { shutdown(); }

void ConsumerThread::start() {
    if (started_.exchange(true)) throw UsageError("consumer thread already started");
    running_ = true;
    thread_ = std::thread([this] { loop(); });
}

void ConsumerThread::shutdown() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
}

std::exception_ptr ConsumerThread::take_error() {
    std::lock_guard lock(mu_);
    if (errors_.empty()) return nullptr;
    auto e = errors_.front();
    errors_.erase(errors_.begin());
    return e;
}

bool ConsumerThread::idle() const {
    return processed_.load() == sub_.delivered_total() - sub_.evicted_total();
}

bool ConsumerThread::wait_idle(Duration timeout) {
    std::unique_lock lock(mu_);
    return progress_cv_.wait_for(lock, timeout.chrono(), [this] { return idle() || !running_.load(); }) && idle();
}

void ConsumerThread::loop() {
    while (!stop_.load()) {
        std::vector<Envelope> batch;
        try {
            batch = sub_.poll(kBatch, kPollSlice);
        } catch (...) {
            std::lock_guard lock(mu_);
            errors_.push_back(std::current_exception());
            break;
        }
        for (auto& env : batch) {
            try {
                queue_.offer(decode_(env));
            } catch (...) {
                std::lock_guard lock(mu_);
                errors_.push_back(std::current_exception());
            }
            processed_.fetch_add(1);
        }
        if (!batch.empty()) {
            std::lock_guard lock(mu_);
            progress_cv_.notify_all();
        }
    }
    {
        std::lock_guard lock(mu_);
        running_ = false;
    }
    progress_cv_.notify_all();
}

}  // namespace cobridge
