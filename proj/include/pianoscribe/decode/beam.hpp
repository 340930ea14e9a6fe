#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "pianoscribe/decode/pitch_set.hpp"
#include "pianoscribe/decode/prior.hpp"

namespace pianoscribe::decode {

class HashKey;

/// Immutable frame sequence with shared prefixes; appending is O(1).
class Sequence {
public:
    Sequence() = default;

    std::size_t size() const { return tail_ ? tail_->length : 0; }
    bool empty() const { return !tail_; }
    Sequence push(const PitchSet& frame) const;
    const PitchSet& back() const { return tail_->frame; }
    std::vector<PitchSet> frames() const;

    /// Lexicographic comparison from the first frame: negative, zero or
    /// positive. A proper prefix compares smaller.
    friend int compare_sequences(const Sequence& a, const Sequence& b);
    friend bool operator==(const Sequence& a, const Sequence& b) { return compare_sequences(a, b) == 0; }

private:
    struct Node {
        PitchSet frame;
        std::shared_ptr<const Node> prev;
        std::size_t length;
    };
    explicit Sequence(std::shared_ptr<const Node> tail) : tail_(std::move(tail)) {}

    friend class HashKey;
    friend bool operator<(const HashKey& a, const HashKey& b);
    std::shared_ptr<const Node> tail_;
};

/// hash_n value meaning the whole sequence is the key.
inline constexpr std::size_t kFullSequence = std::numeric_limits<std::size_t>::max();

/// The final min(n, len) frames of a sequence, compared without copying.
class HashKey {
public:
    HashKey(Sequence seq, std::size_t n);
    std::size_t size() const { return n_; }
    std::vector<PitchSet> frames() const;

    friend bool operator<(const HashKey& a, const HashKey& b);
    friend bool operator==(const HashKey& a, const HashKey& b) { return !(a < b) && !(b < a); }

private:
    Sequence seq_;
    std::size_t n_;
};

HashKey hash_last_n(const Sequence& s, std::size_t n);

/// Entry ordering used throughout decoding: the higher score wins, and on an
/// exact tie the lexicographically smaller sequence wins.
bool better(double score_a, const Sequence& a, double score_b, const Sequence& b);

struct BeamEntry {
    double score = 0.0;
    Sequence seq;
    /// Prior state after consuming seq. Filled lazily for survivors.
    SequencePrior::StatePtr state;
    /// Prior state before the last frame of seq.
    SequencePrior::StatePtr parent_state;
};

/// Bounded frontier: at most `width` entries overall and at most `chain`
/// entries per hash key.
class HashedBeam {
public:
    HashedBeam(std::size_t width, std::size_t chain, std::size_t hash_n);

    /// Returns whether the entry was kept.
    bool insert(BeamEntry entry);

    std::size_t size() const { return entries_.size(); }
    std::size_t key_count() const { return by_key_.size(); }
    const BeamEntry& best() const;
    std::vector<BeamEntry> entries_best_first() const;

    /// Checks membership consistency and capacity bounds; on failure returns
    /// false and describes the first violation in *why.
    bool audit(std::string* why = nullptr) const;

private:
    struct Ref {
        double score;
        const Sequence* seq;
        std::uint64_t id;
    };
    struct Worse {
        bool operator()(const Ref& a, const Ref& b) const;
    };
    using Queue = std::set<Ref, Worse>;

    void remove(Ref victim);

    std::size_t width_;
    std::size_t chain_;
    std::size_t hash_n_;
    std::uint64_t next_id_ = 0;
    std::unordered_map<std::uint64_t, BeamEntry> entries_;
    Queue queue_;
    std::map<HashKey, Queue> by_key_;
};

} // namespace pianoscribe::decode
