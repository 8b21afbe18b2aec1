#ifndef TSR_EPISODE_IO_HPP
#define TSR_EPISODE_IO_HPP

#include <string>
#include <vector>

#include "tsr/taskgen.hpp"

namespace tsr {

// Episode batch file, magic "TSRE". Little-endian throughout, bit-exact
// across platforms.
//
//   header: magic "TSRE" | version u32 | family u32 | count u32
//   per episode, length-prefixed (u32 byte length of the record body):
//     seed u64 | label i64 | image_count u32
//     per image: width u32 | height u32 | f32 pixels (row-major)
//     optional trajectory (present when bytes remain):
//       frames u32 | num_balls u32 | f32 coords (frame-major)
//
// Image order is inputs followed by candidates; the split point is fixed by
// the family (grid 8+8, odd_one_out 0+4, same_different 1+0, concept 13+0).
// Ball episodes store images_count 0 and one trajectory block holding the
// observed rollout followed by the counterfactual rollout (2T frames); the
// intervened initial state is the counterfactual's first frame.
constexpr std::uint32_t kEpisodeFormatVersion = 1;

void write_episode_batch(const std::string& path, TaskFamily family,
                         const std::vector<Episode>& episodes);

// Loads a batch. Episodes come back without rule_meta (the trainer never
// reads it); regenerate from the stored seed when meta is needed.
std::vector<Episode> read_episode_batch(const std::string& path, TaskFamily* family_out = nullptr);

}  // namespace tsr

#endif
