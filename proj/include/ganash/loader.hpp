#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "image.hpp"
#include "networks.hpp"
#include "png_io.hpp"

namespace ganash {

using WarningSink = std::function<void(const std::string&)>;

inline void warn_to_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

/// Images feeding the training loop.
struct BatchSource {
    std::vector<std::filesystem::path> paths;
    std::uint64_t seed = 0;
    std::size_t workers = 4;
    std::size_t buffer = 8;
    std::size_t batch_size = 4;
    std::size_t crop_height = 64;
    std::size_t crop_width = 64;
    WarningSink warn = warn_to_stderr;

    std::size_t batches_per_epoch() const { return (paths.size() + batch_size - 1) / batch_size; }
};

/// Lists the PNG files of `dir` in name order and drops (with a warning)
/// every file that cannot be read or is smaller than the crop.
inline BatchSource scan_image_dir(const std::filesystem::path& dir, std::size_t crop_height, std::size_t crop_width,
                                  WarningSink warn = warn_to_stderr)
{
    if (!std::filesystem::is_directory(dir)) throw ValidationError("image directory '" + dir.string() + "' not found");
    std::vector<std::filesystem::path> found;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png") found.push_back(entry.path());
    }
    std::sort(found.begin(), found.end());
    if (found.empty()) throw ValidationError("image directory '" + dir.string() + "' holds no PNG files");

    BatchSource src;
    src.crop_height = crop_height;
    src.crop_width = crop_width;
    src.warn = warn;
    for (const auto& p : found) {
        try {
            const auto [w, h] = read_png_dims(p);
            if (h < crop_height || w < crop_width) {
                warn("skipping '" + p.string() + "': " + std::to_string(w) + "x" + std::to_string(h) +
                     " is smaller than the crop");
                continue;
            }
            src.paths.push_back(p);
        } catch (const ImageIoError& e) {
            warn(std::string("skipping unreadable image: ") + e.what());
        }
    }
    if (src.paths.empty()) throw ValidationError("no usable images in '" + dir.string() + "'");
    return src;
}

/// A decoded mini-batch.
struct Batch {
    Tensor<float> images;  // B x H x W x 3 in [-1, 1]
    std::vector<std::filesystem::path> paths;
    std::size_t epoch = 0;
    std::size_t index = 0;  // batch index within the epoch
};

namespace detail {

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n)
{
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace detail

/// Image order of one epoch: a seeded Fisher-Yates shuffle of the sources.
inline std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch)
{
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    std::mt19937_64 rng(detail::mix_seed(seed, 0x5eed0000ULL + epoch));
    for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[detail::uniform_index(rng, i)]);
    return order;
}

/// One epoch of batches decoded by a pool of workers.
///
/// Batches arrive in index order whatever the worker timing, and crops are
/// drawn from (seed, epoch, position), so the stream is a pure function of
/// the source and seed. Workers never run more than `buffer` batches ahead
/// of the consumer; together with the batch the consumer holds, at most
/// buffer + 1 decoded batches exist at once.
class BatchStream {
public:
    BatchStream(BatchSource src, std::size_t epoch, std::size_t first_batch = 0)
        : src_(std::move(src)), epoch_(epoch), order_(epoch_order(src_.paths.size(), src_.seed, epoch)),
          total_(src_.batches_per_epoch()), next_claim_(first_batch), next_deliver_(first_batch)
    {
        if (src_.paths.empty()) throw ValidationError("batch source has no images");
        if (src_.batch_size == 0 || src_.buffer == 0 || src_.workers == 0) {
            throw ValidationError("batch size, buffer and workers must be positive");
        }
        for (std::size_t i = 0; i < src_.workers; ++i) threads_.emplace_back([this] { work(); });
    }

    ~BatchStream()
    {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    BatchStream(const BatchStream&) = delete;
    BatchStream& operator=(const BatchStream&) = delete;

    /// Next batch in order, or nullopt at the end of the epoch.
    std::optional<Batch> next()
    {
        std::unique_lock lock(mu_);
        if (holding_) {
            holding_ = false;
            --resident_;
            cv_.notify_all();
        }
        if (next_deliver_ >= total_) return std::nullopt;
        cv_.wait(lock, [this] { return ready_.count(next_deliver_) > 0 || error_; });
        if (error_) std::rethrow_exception(error_);
        Batch out = std::move(ready_.at(next_deliver_));
        ready_.erase(next_deliver_);
        ++next_deliver_;
        holding_ = true;
        cv_.notify_all();
        return out;
    }

    std::size_t peak_resident() const
    {
        std::lock_guard lock(mu_);
        return peak_;
    }

private:
    void work()
    {
        for (;;) {
            std::size_t index = 0;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [this] {
                    return stop_ || next_claim_ >= total_ || next_claim_ < next_deliver_ + src_.buffer;
                });
                if (stop_ || next_claim_ >= total_) return;
                index = next_claim_++;
                ++resident_;
                peak_ = std::max(peak_, resident_);
            }
            try {
                Batch b = build(index);
                std::lock_guard lock(mu_);
                ready_.emplace(index, std::move(b));
            } catch (...) {
                std::lock_guard lock(mu_);
                if (!error_) error_ = std::current_exception();
            }
            cv_.notify_all();
        }
    }

    Batch build(std::size_t index) const
    {
        Batch b;
        b.epoch = epoch_;
        b.index = index;
        std::vector<ImageBuffer> crops;
        const std::size_t begin = index * src_.batch_size;
        const std::size_t end = std::min(begin + src_.batch_size, order_.size());
        for (std::size_t pos = begin; pos < end; ++pos) {
            const auto& path = src_.paths[order_[pos]];
            std::mt19937_64 rng(detail::mix_seed(src_.seed, (epoch_ << 32) ^ (0xc0ffee00ULL + pos)));
            try {
                ImageBuffer img = read_png(path);
                if (img.height < src_.crop_height || img.width < src_.crop_width) {
                    src_.warn("skipping '" + path.string() + "': smaller than the crop");
                    continue;
                }
                const std::size_t top = detail::uniform_index(rng, img.height - src_.crop_height + 1);
                const std::size_t left = detail::uniform_index(rng, img.width - src_.crop_width + 1);
                crops.push_back(img.crop(top, left, src_.crop_height, src_.crop_width));
                b.paths.push_back(path);
            } catch (const ImageIoError& e) {
                src_.warn(std::string("skipping image: ") + e.what());
            }
        }
        if (crops.empty()) throw ValidationError("batch " + std::to_string(index) + " has no readable images");
        b.images = images_to_tensor<float>(crops);
        return b;
    }

    BatchSource src_;
    std::size_t epoch_;
    std::vector<std::size_t> order_;
    std::size_t total_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::size_t next_claim_;
    std::size_t next_deliver_;
    std::map<std::size_t, Batch> ready_;
    std::size_t resident_ = 0;
    std::size_t peak_ = 0;
    bool holding_ = false;
    bool stop_ = false;
    std::exception_ptr error_;
    std::vector<std::thread> threads_;
};

}  // namespace ganash
