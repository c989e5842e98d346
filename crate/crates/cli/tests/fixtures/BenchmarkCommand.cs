using System;
using System.Linq;
using System.Threading.Tasks;

namespace Benchmarks.Commands
{
	public class BenchmarkCommand : ICommand
	{
		private WriteBenchmarkCommand _writeBenchmark = new WriteBenchmarkCommand();
		private ReadBenchmarkCommand _readBenchmark = new ReadBenchmarkCommand();

		// timing state
		public int Runs { get; set; }

		public async Task Start(int count)
		{
			await _writeBenchmark.Start(count);
			await _readBenchmark.Start(count);
		}

		public async Task Stop()
		{
			await _writeBenchmark.Stop();
			await _readBenchmark.Stop();
		}

		public bool IsStopped() => _writeBenchmark.Done && _readBenchmark.Done;
	}
}
