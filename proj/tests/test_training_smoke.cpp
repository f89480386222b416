#include <gtest/gtest.h>

#include "ganash/ganash.hpp"
#include "support/tempdir.hpp"

using namespace ganash;

// A short real training run through the file pipeline: the decoder must
// learn a usable channel while the stego stays close to the cover.
TEST(TrainingSmoke, LearnsChannelOnSmallImages)
{
    ganash::testing::TempDir dir;
    std::vector<ImageBuffer> covers;
    std::filesystem::create_directories(dir / "images");
    for (int i = 0; i < 8; ++i) {
        covers.push_back(natural_image(32, 32, 300 + static_cast<std::uint64_t>(i)));
        write_png(dir / "images" / ("c" + std::to_string(i) + ".png"), covers.back());
    }
    TrainConfig cfg;
    cfg.image_dir = (dir / "images").string();
    cfg.checkpoint_dir = (dir / "ckpt").string();
    cfg.data_depth = 1;
    cfg.crop = 32;
    cfg.batch_size = 4;
    cfg.steps = 300;
    cfg.checkpoint_every = 300;
    cfg.seed = 3;
    auto state = train(cfg);
    const auto q = evaluate_channel(state.encoder, state.decoder, covers, 99);
    EXPECT_GE(q.bit_accuracy, 0.95);
    EXPECT_GE(q.psnr, 30.0);
    RecordProperty("bit_accuracy", std::to_string(q.bit_accuracy));
    RecordProperty("psnr", std::to_string(q.psnr));
    std::cout << "bit accuracy " << q.bit_accuracy << ", PSNR " << q.psnr << " dB\n";
}
