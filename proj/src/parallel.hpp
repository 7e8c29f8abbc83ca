#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace facecascade::detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers with static
/// contiguous chunks. The first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn)
{
	const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n, 1));
	if (workers <= 1) {
		for (std::size_t i = 0; i < n; ++i)
			fn(i);
		return;
	}
	std::exception_ptr error;
	std::mutex mu;
	std::vector<std::thread> pool;
	const std::size_t chunk = (n + workers - 1) / workers;
	for (std::size_t w = 0; w < workers; ++w) {
		pool.emplace_back([&, w] {
			const std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
			try {
				for (std::size_t i = begin; i < end; ++i)
					fn(i);
			} catch (...) {
				std::lock_guard lock(mu);
				if (!error)
					error = std::current_exception();
			}
		});
	}
	for (auto& t : pool)
		t.join();
	if (error)
		std::rethrow_exception(error);
}

} // namespace facecascade::detail
