package testing

type testContext struct {
	mu sync.Mutex
	//  ... other code ...
}

func (t *T) run(...) bool {
	testName := name
	if t.level > 0 {
		testName = t.name + "/" + name
	}
	// ... other code ...
}

func newTestContext(maxParallel int) *testContext {
	return &testContext{
		startParallel: make(chan bool),
		maxParallel:   maxParallel,
		running:       1, // Set the count to 1 for the main (sequential) test.
	}
}
