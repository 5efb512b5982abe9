package testing

type benchContext struct {
	maxLen int // The largest recorded benchmark name.
}

func runBenchmarksInternal(...) bool {
	// ... other code ...
	ctx := &benchContext{
		extLen: len(benchmarkName("", maxprocs)),
	}
	// ... other code ...
}

func (b *B) runBench(...) bool {
	// ... other code ...
	if b.level > 0 {
		name = b.name + "/" + name
	}
	// ... other code ...
}
